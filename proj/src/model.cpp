#include "obstinate/model.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace obstinate {

namespace {

constexpr char kMagic[3] = {'O', 'B', 'F'};

bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::equal(a.data(), a.data() + a.size(), b.data(),
                    [](double x, double y) { return std::bit_cast<std::uint64_t>(x) ==
                                                    std::bit_cast<std::uint64_t>(y); });
}

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  // Row-major regardless of Eigen's storage order.
  void matrix(const Eigen::MatrixXd& m) {
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }
  void raw(std::string_view s) { bytes_.append(s); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  Eigen::MatrixXd matrix(Index rows, Index cols) {
    need(static_cast<std::size_t>(rows * cols) * 8);
    Eigen::MatrixXd m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m(r, c) = f64();
    return m;
  }
  std::string raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(Errc::CorruptFile, "truncated checkpoint");
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

std::string serialize(const Checkpoint& ckpt) {
  ByteWriter w;
  w.raw(std::string_view(kMagic, 3));
  w.raw(std::string(1, static_cast<char>('0' + ckpt.format_version)));
  w.u32(static_cast<std::uint32_t>(ckpt.n_words()));
  w.u32(static_cast<std::uint32_t>(ckpt.dim()));
  w.u32(static_cast<std::uint32_t>(ckpt.hidden()));
  w.u32(static_cast<std::uint32_t>(ckpt.classes()));
  w.matrix(ckpt.embedding);
  w.matrix(ckpt.hidden_weights);
  w.matrix(ckpt.hidden_bias);
  w.matrix(ckpt.out_weights);
  w.matrix(ckpt.out_bias);
  for (const auto& name : ckpt.label_names) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name);
  }
  w.u64(ckpt.vocab_fingerprint);
  return w.bytes();
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

bool identical(const Checkpoint& a, const Checkpoint& b) {
  return same(a.embedding, b.embedding) && same(a.hidden_weights, b.hidden_weights) &&
         same(a.hidden_bias, b.hidden_bias) && same(a.out_weights, b.out_weights) &&
         same(a.out_bias, b.out_bias) && a.label_names == b.label_names &&
         a.vocab_fingerprint == b.vocab_fingerprint && a.format_version == b.format_version;
}

Eigen::VectorXd mean_embedding(const Checkpoint& ckpt, const std::vector<TokenId>& ids) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(ckpt.dim());
  if (ids.empty()) return sum;
  for (auto id : ids) {
    if (id < 0 || id >= ckpt.n_words()) throw Error(Errc::IdOutOfRange, "token id");
    sum += ckpt.embedding.row(id).transpose();
  }
  return sum / static_cast<double>(ids.size());
}

double accuracy(const Checkpoint& ckpt, const Vocabulary& vocab,
                const std::vector<Example>& corpus) {
  if (corpus.empty()) return 0.0;
  long hits = 0;
  for (const auto& ex : corpus) {
    auto e = encode(vocab, ex.first, ex.second);
    hits += forward(ckpt, e).predicted_label == ex.label;
  }
  return static_cast<double>(hits) / static_cast<double>(corpus.size());
}

TrainResult train(const std::vector<Example>& corpus, const Vocabulary& vocab,
                  const TrainOptions& options) {
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "nothing to train on");
  if (options.dim < 1 || options.hidden < 1 || options.epochs < 0 || options.batch_size < 1 ||
      !(options.learning_rate > 0))
    throw Error(Errc::InvalidConfig, "bad training hyperparameters");

  int max_label = 0;
  for (const auto& ex : corpus) {
    if (ex.label < 0) throw Error(Errc::LabelOutOfRange, std::to_string(ex.label));
    max_label = std::max(max_label, ex.label);
  }
  const int classes = options.classes > 0 ? options.classes : std::max(2, max_label + 1);
  if (max_label >= classes) throw Error(Errc::LabelOutOfRange, std::to_string(max_label));

  std::vector<EncodedInput> inputs;
  inputs.reserve(corpus.size());
  for (const auto& ex : corpus) inputs.push_back(encode(vocab, ex.first, ex.second, options.slot));

  const Index V = vocab.size(), d = options.dim, h = options.hidden, c = classes;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  auto uniform_fill = [&rng](Eigen::MatrixXd& m, double limit) {
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
  };

  Checkpoint ckpt;
  ckpt.embedding.resize(V, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < V; ++i) ckpt.embedding(i, j) = normal(rng);
  ckpt.embedding.row(Vocabulary::kRef).setZero();
  ckpt.hidden_weights.resize(2 * d, h);
  uniform_fill(ckpt.hidden_weights, std::sqrt(6.0 / double(2 * d + h)));
  ckpt.hidden_bias = Eigen::VectorXd::Zero(h);
  ckpt.out_weights.resize(h, c);
  uniform_fill(ckpt.out_weights, std::sqrt(6.0 / double(h + c)));
  ckpt.out_bias = Eigen::VectorXd::Zero(c);
  for (int k = 0; k < classes; ++k) ckpt.label_names.push_back(std::to_string(k));
  ckpt.vocab_fingerprint = vocab.fingerprint();

  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);

  Eigen::MatrixXd g_emb(V, d), g_w1(2 * d, h), g_w2(h, c);
  Eigen::VectorXd g_b1(h), g_b2(c);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(options.batch_size)) {
      const auto stop = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      g_emb.setZero();
      g_w1.setZero();
      g_w2.setZero();
      g_b1.setZero();
      g_b2.setZero();
      for (std::size_t b = start; b < stop; ++b) {
        const auto& e = inputs[order[b]];
        Eigen::MatrixXd rows(e.rows(), d);
        for (Index r = 0; r < e.rows(); ++r) rows.row(r) = ckpt.embedding.row(e.ids[std::size_t(r)]);
        auto act = head_forward(ckpt, rows, e.segments);
        Eigen::VectorXd dlogits = softmax(act.logits);
        dlogits(corpus[order[b]].label) -= 1.0;

        g_w2.noalias() += act.hidden * dlogits.transpose();
        g_b2 += dlogits;
        Eigen::VectorXd dpre =
            (ckpt.out_weights * dlogits).array() * (1.0 - act.hidden.array().square());
        g_w1.noalias() += act.pooled * dpre.transpose();
        g_b1 += dpre;
        auto drows = head_backward(ckpt, act, dlogits, e.segments, e.rows());
        for (Index r = 0; r < e.rows(); ++r) g_emb.row(e.ids[std::size_t(r)]) += drows.row(r);
      }
      const double step = options.learning_rate / static_cast<double>(stop - start);
      ckpt.embedding -= step * g_emb;
      ckpt.hidden_weights -= step * g_w1;
      ckpt.hidden_bias -= step * g_b1;
      ckpt.out_weights -= step * g_w2;
      ckpt.out_bias -= step * g_b2;
      ckpt.embedding.row(Vocabulary::kRef).setZero();
    }
  }

  TrainResult result{std::move(ckpt), 0.0};
  result.train_accuracy = accuracy(result.checkpoint, vocab, corpus);
  return result;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const auto bytes = serialize(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoFailure, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  ByteReader r(buf.str());

  auto magic = r.raw(4);
  if (magic.compare(0, 3, kMagic, 3) != 0) throw Error(Errc::CorruptFile, "bad magic");
  if (magic[3] != char('0' + Checkpoint::kFormatVersion))
    throw Error(Errc::FormatVersionMismatch, std::string("version ") + magic[3]);

  const Index V = r.u32(), d = r.u32(), h = r.u32(), c = r.u32();
  // Reject absurd headers before allocating.
  constexpr Index kLimit = Index(1) << 24;
  if (V < 5 || d < 1 || h < 1 || c < 1 || V > kLimit || d > kLimit || h > kLimit || c > kLimit)
    throw Error(Errc::CorruptFile, "bad dimensions");

  Checkpoint ckpt;
  ckpt.embedding = r.matrix(V, d);
  ckpt.hidden_weights = r.matrix(2 * d, h);
  ckpt.hidden_bias = r.matrix(h, 1);
  ckpt.out_weights = r.matrix(h, c);
  ckpt.out_bias = r.matrix(c, 1);
  for (Index k = 0; k < c; ++k) {
    auto len = r.u32();
    ckpt.label_names.push_back(r.raw(len));
  }
  ckpt.vocab_fingerprint = r.u64();
  if (!r.done()) throw Error(Errc::CorruptFile, "trailing bytes");

  auto finite = [](const Eigen::MatrixXd& m) { return m.allFinite(); };
  if (!finite(ckpt.embedding) || !finite(ckpt.hidden_weights) || !finite(ckpt.hidden_bias) ||
      !finite(ckpt.out_weights) || !finite(ckpt.out_bias))
    throw Error(Errc::CorruptFile, "non-finite weights");
  if (!ckpt.embedding.row(Vocabulary::kRef).isZero(0.0))
    throw Error(Errc::CorruptFile, "REF embedding is not zero");
  return ckpt;
}

Checkpoint load_checkpoint(const std::string& path, const Vocabulary& vocab) {
  auto ckpt = load_checkpoint(path);
  if (ckpt.vocab_fingerprint != vocab.fingerprint() || ckpt.n_words() != vocab.size())
    throw Error(Errc::VocabFingerprintMismatch, path);
  return ckpt;
}

std::uint64_t checkpoint_hash(const Checkpoint& ckpt) { return fnv1a(serialize(ckpt)); }

}  // namespace obstinate
