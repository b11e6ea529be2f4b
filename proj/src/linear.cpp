#include "perfrank/linear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "perfrank/error.hpp"
#include "perfrank/util.hpp"

namespace perfrank {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning_rate must be > 0");
  if (epochs < 1) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 1");
  if (!(l2 >= 0.0)) throw Error(ErrorKind::InvalidConfig, "l2 must be >= 0");
  if (batch_size < 1) throw Error(ErrorKind::InvalidConfig, "batch_size must be >= 1");
  if (!(tolerance >= 0.0)) throw Error(ErrorKind::InvalidConfig, "tolerance must be >= 0");
}

LinearModel::LinearModel(std::vector<Label> classes, std::size_t n_features, std::string vocab_fingerprint)
    : classes_(std::move(classes)),
      n_features_(n_features),
      vocab_fingerprint_(std::move(vocab_fingerprint)),
      weights_(classes_.size() * n_features, 0.0),
      bias_(classes_.size(), 0.0) {
  if (classes_.size() < 2) throw Error(ErrorKind::InvalidConfig, "a linear model needs >= 2 classes");
}

std::vector<double> LinearModel::logits(const SparseVector& x) const {
  std::vector<double> z(bias_.begin(), bias_.end());
  for (const auto& [idx, value] : x.entries) {
    if (idx >= n_features_) {
      throw Error(ErrorKind::DimensionMismatch, "feature index " + std::to_string(idx) +
                                                    " >= model dimension " + std::to_string(n_features_));
    }
    for (std::size_t c = 0; c < z.size(); ++c) z[c] += weights_[c * n_features_ + idx] * value;
  }
  return z;
}

namespace {

// In-place softmax; returns log-sum-exp of the input.
double softmax_inplace(std::vector<double>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (auto& v : z) v /= sum;
  return zmax + std::log(sum);
}

void check_training_inputs(std::span<const SparseVector> X, std::span<const std::size_t> y, std::size_t n_classes) {
  if (X.size() != y.size()) {
    throw Error(ErrorKind::LengthMismatch, "X has " + std::to_string(X.size()) + " rows, y has " +
                                               std::to_string(y.size()));
  }
  if (X.size() < 2) throw Error(ErrorKind::TooFewInstances, "need >= 2 training rows");
  for (auto label : y) {
    if (label >= n_classes) throw Error(ErrorKind::OutOfRange, "class index " + std::to_string(label));
  }
}

// Accumulates loss and gradient over rows[0..count). Gradient is averaged and
// regularized; loss is mean cross-entropy plus the ridge term.
double accumulate(const LinearModel& model, std::span<const SparseVector> X, std::span<const std::size_t> y,
                  std::span<const std::size_t> rows, double l2, std::vector<double>& grad_w,
                  std::vector<double>& grad_b) {
  const std::size_t k = model.n_classes();
  const std::size_t f = model.n_features();
  std::fill(grad_w.begin(), grad_w.end(), 0.0);
  std::fill(grad_b.begin(), grad_b.end(), 0.0);
  double loss = 0.0;
  for (auto row : rows) {
    auto z = model.logits(X[row]);
    const double gold_logit = z[y[row]];
    loss += softmax_inplace(z) - gold_logit;
    z[y[row]] -= 1.0;  // z now holds p - onehot(y)
    for (std::size_t c = 0; c < k; ++c) {
      grad_b[c] += z[c];
      for (const auto& [idx, value] : X[row].entries) grad_w[c * f + idx] += z[c] * value;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  loss *= inv_n;
  for (auto& g : grad_b) g *= inv_n;
  const auto w = model.weights();
  double sq = 0.0;
  for (std::size_t i = 0; i < grad_w.size(); ++i) {
    grad_w[i] = grad_w[i] * inv_n + l2 * w[i];
    sq += w[i] * w[i];
  }
  return loss + 0.5 * l2 * sq;
}

}  // namespace

std::vector<double> predict_proba(const LinearModel& model, const SparseVector& x) {
  auto z = model.logits(x);
  softmax_inplace(z);
  return z;
}

LossGradient loss_and_gradient(const LinearModel& model, std::span<const SparseVector> X,
                               std::span<const std::size_t> y, double l2) {
  if (X.size() != y.size()) throw Error(ErrorKind::LengthMismatch, "X and y differ in length");
  if (X.empty()) throw Error(ErrorKind::TooFewInstances, "empty training set");
  for (auto label : y) {
    if (label >= model.n_classes()) throw Error(ErrorKind::OutOfRange, "class index " + std::to_string(label));
  }
  std::vector<std::size_t> rows(X.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  LossGradient out;
  out.weights.resize(model.weights().size());
  out.bias.resize(model.n_classes());
  out.loss = accumulate(model, X, y, rows, l2, out.weights, out.bias);
  return out;
}

LinearModel train(std::span<const SparseVector> X, std::span<const std::size_t> y, std::vector<Label> classes,
                  std::size_t n_features, const TrainConfig& config, std::string vocab_fingerprint) {
  config.validate();
  LinearModel model(std::move(classes), n_features, std::move(vocab_fingerprint));
  check_training_inputs(X, y, model.n_classes());
  if (std::set<std::size_t>(y.begin(), y.end()).size() < 2) {
    throw Error(ErrorKind::DegenerateLabels, "all training labels are '" + model.classes()[y.front()] + "'");
  }

  const std::size_t n = X.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> all_rows = order;
  std::vector<double> grad_w(model.weights_.size());
  std::vector<double> grad_b(model.n_classes());
  Engine engine(config.seed);
  const double lr = config.learning_rate;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, engine);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      std::span<const std::size_t> batch(order.data() + start, end - start);
      accumulate(model, X, y, batch, config.l2, grad_w, grad_b);
      for (std::size_t i = 0; i < grad_w.size(); ++i) model.weights_[i] -= lr * grad_w[i];
      for (std::size_t c = 0; c < grad_b.size(); ++c) model.bias_[c] -= lr * grad_b[c];
    }
    const double loss = accumulate(model, X, y, all_rows, config.l2, grad_w, grad_b);
    if (!std::isfinite(loss)) {
      throw Error(ErrorKind::NonFinite, "training loss diverged at epoch " + std::to_string(epoch + 1));
    }
    const bool converged = config.tolerance > 0.0 && !model.loss_history_.empty() &&
                           std::abs(model.loss_history_.back() - loss) < config.tolerance;
    model.loss_history_.push_back(loss);
    if (converged) break;
  }
  return model;
}

namespace {

std::string join_doubles(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ' ';
    out += format_double(values[i]);
  }
  return out;
}

std::vector<double> split_doubles(const std::string& line, std::size_t expected, const std::string& what) {
  std::vector<double> values;
  values.reserve(expected);
  std::size_t pos = 0;
  while (pos < line.size()) {
    auto end = line.find(' ', pos);
    if (end == std::string::npos) end = line.size();
    if (end > pos) values.push_back(parse_double(std::string_view(line).substr(pos, end - pos)));
    pos = end + 1;
  }
  if (values.size() != expected) {
    throw Error(ErrorKind::Format, what + ": expected " + std::to_string(expected) + " values, found " +
                                       std::to_string(values.size()));
  }
  return values;
}

}  // namespace

// Layout: a JSON header line, then one line of bias terms, one line per class
// of weights, and one line of loss history. Doubles use the shortest
// round-trip form, so save -> load is bit-exact.
void LinearModel::save(const std::filesystem::path& path) const {
  json header{{"format", "perfrank-linear-model"},
              {"version", 1},
              {"classes", classes_},
              {"n_features", n_features_},
              {"vocab_fingerprint", vocab_fingerprint_},
              {"epochs_run", loss_history_.size()}};
  std::string out = dump_json(header) + "\n";
  out += join_doubles(bias_) + "\n";
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    out += join_doubles(std::span<const double>(weights_).subspan(c * n_features_, n_features_)) + "\n";
  }
  out += join_doubles(loss_history_) + "\n";
  write_text_file(path, out);
}

LinearModel LinearModel::load(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) throw Error(ErrorKind::Format, path.string() + ": truncated at " + what);
    return line;
  };
  json header;
  try {
    header = json::parse(next_line("header"));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  if (header.value("format", "") != "perfrank-linear-model" || header.value("version", 0) != 1) {
    throw Error(ErrorKind::Format, path.string() + ": not a perfrank linear model v1");
  }
  LinearModel model(header.at("classes").get<std::vector<Label>>(), header.at("n_features").get<std::size_t>(),
                    header.at("vocab_fingerprint").get<std::string>());
  model.bias_ = split_doubles(next_line("bias"), model.n_classes(), "bias");
  for (std::size_t c = 0; c < model.n_classes(); ++c) {
    auto row = split_doubles(next_line("weights"), model.n_features_, "weights row");
    std::copy(row.begin(), row.end(), model.weights_.begin() + static_cast<std::ptrdiff_t>(c * model.n_features_));
  }
  model.loss_history_ =
      split_doubles(next_line("loss history"), header.at("epochs_run").get<std::size_t>(), "loss history");
  return model;
}

void TextClassifier::check_binding() const {
  if (model.vocab_fingerprint() != vocab.fingerprint()) {
    throw Error(ErrorKind::FingerprintMismatch, "model was trained against vocabulary " + model.vocab_fingerprint() +
                                                    ", got " + vocab.fingerprint());
  }
  if (model.n_features() < vocab.size()) {
    throw Error(ErrorKind::DimensionMismatch, "model has fewer features than the vocabulary");
  }
}

void TextClassifier::save(const std::filesystem::path& dir) const {
  vocab.save(dir / "vocab.jsonl");
  model.save(dir / "model.txt");
}

TextClassifier TextClassifier::load(const std::filesystem::path& dir) {
  TextClassifier tc{Vocabulary::load(dir / "vocab.jsonl"), LinearModel::load(dir / "model.txt")};
  tc.check_binding();
  return tc;
}

}  // namespace perfrank
