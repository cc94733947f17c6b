#include "vaeprobe/vae.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

namespace vaeprobe::vae {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr char kMagic[4] = {'V', 'A', 'E', 'C'};

// Sub-seed salts, one stream per concern.
constexpr std::uint64_t kSaltEncoderInit = 0xE0C0DE;
constexpr std::uint64_t kSaltDecoderInit = 0xDEC0DE;
constexpr std::uint64_t kSaltShuffle = 0x5FF1E;
constexpr std::uint64_t kSaltNoise = 0x4015E;

Mat sigmoid(const Mat& logits) {
  return (1.0 / (1.0 + (-logits.array()).exp())).matrix();
}

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

void check_spec(const VaeSpec& spec) {
  if (spec.latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  for (int w : spec.encoder_hidden)
    if (w < 1) throw ConfigError("encoder hidden widths must be >= 1");
  for (int w : spec.decoder_hidden)
    if (w < 1) throw ConfigError("decoder hidden widths must be >= 1");
  if (spec.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (spec.epochs < 0) throw ConfigError("epochs must be >= 0");
}

}  // namespace

VaeModel init_model(const VaeSpec& spec) {
  check_spec(spec);
  VaeModel m;
  m.spec = spec;
  m.encoder = nn::make_net(
      nn::chain_layers(mnist::kImagePixels, spec.encoder_hidden, 2 * spec.latent_dim),
      mix_seed(spec.seed, kSaltEncoderInit));
  m.decoder = nn::make_net(
      nn::chain_layers(spec.latent_dim, spec.decoder_hidden, mnist::kImagePixels),
      mix_seed(spec.seed, kSaltDecoderInit));
  return m;
}

GaussianPosterior encode(const VaeModel& model, const Vec& pixels) {
  const Vec h = nn::forward(model.encoder, pixels);
  const int k = model.spec.latent_dim;
  return {h.head(k), h.tail(k)};
}

Vec reparameterize(const GaussianPosterior& post, const Vec& noise) {
  if (noise.size() != post.mean.size())
    throw ShapeError("reparameterize: noise length mismatch");
  return post.mean.array() + (0.5 * post.log_variance.array()).exp() * noise.array();
}

Vec decode_logits(const VaeModel& model, const Vec& z) {
  return nn::forward(model.decoder, z);
}

Vec decode(const VaeModel& model, const Vec& z) {
  return sigmoid(decode_logits(model, z)).col(0);
}

double bce(const Vec& target, const Vec& probs) {
  if (target.size() != probs.size()) throw ShapeError("bce: length mismatch");
  constexpr double eps = 1e-12;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < target.size(); ++j) {
    const double p = std::clamp(probs(j), eps, 1.0 - eps);
    acc -= target(j) * std::log(p) + (1.0 - target(j)) * std::log(1.0 - p);
  }
  return acc;
}

double bce_from_logits(const Vec& target, const Vec& logits) {
  if (target.size() != logits.size())
    throw ShapeError("bce_from_logits: length mismatch");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < target.size(); ++j)
    acc += softplus(logits(j)) - target(j) * logits(j);
  return acc;
}

double kl_to_prior(const GaussianPosterior& post) {
  const auto& m = post.mean.array();
  const auto& lv = post.log_variance.array();
  return 0.5 * (m.square() + lv.exp() - 1.0 - lv).sum();
}

ElboTerms elbo_terms(const VaeModel& model, const Vec& pixels, const Vec& noise) {
  const GaussianPosterior post = encode(model, pixels);
  const Vec z = reparameterize(post, noise);
  const Vec logits = decode_logits(model, z);
  return {bce_from_logits(pixels, logits), kl_to_prior(post)};
}

ElboTerms elbo_batch_gradients(const VaeModel& model, const Mat& pixels,
                               const Mat& noise,
                               nn::GradientBuffer& encoder_grads,
                               nn::GradientBuffer& decoder_grads) {
  const int k = model.spec.latent_dim;
  if (noise.rows() != k || noise.cols() != pixels.cols())
    throw ShapeError("elbo_batch_gradients: noise shape mismatch");

  nn::Tape enc_tape;
  const Mat h = nn::forward(model.encoder, pixels, &enc_tape);
  const Mat mu = h.topRows(k);
  const Mat lv = h.bottomRows(k);
  const Mat sigma = (0.5 * lv.array()).exp().matrix();
  const Mat z = (mu.array() + sigma.array() * noise.array()).matrix();

  nn::Tape dec_tape;
  const Mat logits = nn::forward(model.decoder, z, &dec_tape);

  double bce_sum = 0.0;
  for (Eigen::Index col = 0; col < logits.cols(); ++col)
    bce_sum += bce_from_logits(pixels.col(col), logits.col(col));
  const double kl_sum =
      0.5 * (mu.array().square() + lv.array().exp() - 1.0 - lv.array()).sum();

  const Mat dlogits = sigmoid(logits) - pixels;
  const Mat dz = nn::backward(model.decoder, dec_tape, dlogits, decoder_grads);

  Mat dh(2 * k, pixels.cols());
  dh.topRows(k) = dz + mu;  // reparam path + d(KL)/d(mean)
  dh.bottomRows(k) = (dz.array() * 0.5 * sigma.array() * noise.array() +
                      0.5 * (lv.array().exp() - 1.0))
                         .matrix();
  nn::backward(model.encoder, enc_tape, dh, encoder_grads);
  return {bce_sum, kl_sum};
}

ElboTerms elbo_gradients(const VaeModel& model, const Vec& pixels,
                         const Vec& noise, nn::GradientBuffer& encoder_grads,
                         nn::GradientBuffer& decoder_grads) {
  return elbo_batch_gradients(model, Mat(pixels), Mat(noise), encoder_grads,
                              decoder_grads);
}

namespace {

void scale_grads(nn::GradientBuffer& g, double factor) {
  for (auto& w : g.weights) w *= factor;
  for (auto& b : g.biases) b *= factor;
}

// One minibatch step on the mean loss; returns per-example sums of the terms.
std::pair<double, double> train_step(VaeModel& model, const Mat& batch,
                                     const Mat& noise, nn::AdamState& enc_adam,
                                     nn::AdamState& dec_adam,
                                     nn::GradientBuffer& enc_grads,
                                     nn::GradientBuffer& dec_grads) {
  enc_grads.set_zero();
  dec_grads.set_zero();
  const ElboTerms sums =
      elbo_batch_gradients(model, batch, noise, enc_grads, dec_grads);
  const double inv_b = 1.0 / static_cast<double>(batch.cols());
  scale_grads(enc_grads, inv_b);
  scale_grads(dec_grads, inv_b);
  nn::adam_step(model.encoder, enc_grads, enc_adam);
  nn::adam_step(model.decoder, dec_grads, dec_adam);
  return {sums.reconstruction_bce, sums.kl};
}

}  // namespace

TrainResult train(const VaeSpec& spec, const std::vector<mnist::Image>& train_set,
                  const EpochCallback& on_epoch) {
  check_spec(spec);
  if (train_set.empty()) throw ConfigError("train: empty training set");

  TrainResult result;
  result.model = init_model(spec);
  result.model.train_set_id = mnist::dataset_id(train_set);

  const std::vector<mnist::Image> ordered = mnist::canonical_order(train_set);
  const std::size_t n = ordered.size();
  Mat all(mnist::kImagePixels, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) all.col(static_cast<Eigen::Index>(i)) = ordered[i].pixels;

  const int k = spec.latent_dim;
  nn::AdamState enc_adam = nn::make_adam(result.model.encoder, spec.adam);
  nn::AdamState dec_adam = nn::make_adam(result.model.decoder, spec.adam);
  nn::GradientBuffer enc_grads = nn::zeros_like(result.model.encoder);
  nn::GradientBuffer dec_grads = nn::zeros_like(result.model.decoder);

  std::mt19937_64 shuffle_rng(mix_seed(spec.seed, kSaltShuffle));
  std::mt19937_64 noise_rng(mix_seed(spec.seed, kSaltNoise));
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(perm[i - 1], perm[pick(shuffle_rng)]);
    }

    double epoch_bce = 0.0, epoch_kl = 0.0;
    for (std::size_t start = 0; start < n; start += spec.batch_size) {
      const std::size_t bsz = std::min<std::size_t>(spec.batch_size, n - start);
      Mat batch(mnist::kImagePixels, static_cast<Eigen::Index>(bsz));
      for (std::size_t j = 0; j < bsz; ++j)
        batch.col(static_cast<Eigen::Index>(j)) =
            all.col(static_cast<Eigen::Index>(perm[start + j]));
      Mat noise(k, static_cast<Eigen::Index>(bsz));
      for (Eigen::Index col = 0; col < noise.cols(); ++col)
        for (Eigen::Index row = 0; row < noise.rows(); ++row)
          noise(row, col) = normal(noise_rng);

      const auto [bce_sum, kl_sum] = train_step(
          result.model, batch, noise, enc_adam, dec_adam, enc_grads, dec_grads);
      if (!std::isfinite(bce_sum) || !std::isfinite(kl_sum))
        throw NumericError("train: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch starting at " +
                           std::to_string(start));
      epoch_bce += bce_sum;
      epoch_kl += kl_sum;
    }

    ElboTerms mean{epoch_bce / static_cast<double>(n),
                   epoch_kl / static_cast<double>(n)};
    result.history.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

void write_history_csv(const std::vector<ElboTerms>& history,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,recon_bce,kl,neg_elbo\n";
  char buf[128];
  for (std::size_t e = 0; e < history.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", e,
                  history[e].reconstruction_bce, history[e].kl,
                  history[e].negative_elbo());
    out << buf;
  }
}

namespace {

using nlohmann::json;

json layers_to_json(const nn::DenseNet& net) {
  json arr = json::array();
  for (const auto& l : net.layers)
    arr.push_back({l.input_width, l.output_width,
                   l.activation == nn::Activation::kTanh ? "tanh" : "identity"});
  return arr;
}

void append_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_params(std::string& out, const nn::DenseNet& net) {
  auto append_doubles = [&out](const double* p, std::size_t count) {
    const std::size_t pos = out.size();
    out.resize(pos + count * sizeof(double));
    std::memcpy(out.data() + pos, p, count * sizeof(double));
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    // Row-major weight order, independent of Eigen's internal layout.
    const Mat& w = net.weights[l];
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) row_major.push_back(w(r, c));
    append_doubles(row_major.data(), row_major.size());
    append_doubles(net.biases[l].data(), static_cast<std::size_t>(net.biases[l].size()));
  }
}

class ParamReader {
 public:
  ParamReader(const std::string& bytes, std::size_t offset)
      : bytes_(bytes), offset_(offset) {}

  void read_into(nn::DenseNet& net) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      Mat& w = net.weights[l];
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = next();
      Vec& b = net.biases[l];
      for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = next();
    }
  }

  std::size_t offset() const { return offset_; }

 private:
  double next() {
    if (offset_ + sizeof(double) > bytes_.size())
      throw FormatError("checkpoint truncated at byte " + std::to_string(offset_));
    double v;
    std::memcpy(&v, bytes_.data() + offset_, sizeof(double));
    offset_ += sizeof(double);
    return v;
  }

  const std::string& bytes_;
  std::size_t offset_;
};

}  // namespace

void save_checkpoint(const VaeModel& model, const std::string& path) {
  json meta;
  meta["spec"] = {{"latent_dim", model.spec.latent_dim},
                  {"encoder_hidden", model.spec.encoder_hidden},
                  {"decoder_hidden", model.spec.decoder_hidden},
                  {"seed", model.spec.seed},
                  {"adam",
                   {{"learning_rate", model.spec.adam.learning_rate},
                    {"beta1", model.spec.adam.beta1},
                    {"beta2", model.spec.adam.beta2},
                    {"epsilon", model.spec.adam.epsilon}}},
                  {"epochs", model.spec.epochs},
                  {"batch_size", model.spec.batch_size}};
  meta["layers"] = {{"encoder", layers_to_json(model.encoder)},
                    {"decoder", layers_to_json(model.decoder)}};
  meta["train_set_id"] = model.train_set_id;
  meta["held_out"] = model.held_out;
  meta["subset"] = model.subset;
  meta["toolkit_version"] = kToolkitVersion;
  const std::string meta_str = meta.dump();

  std::string out;
  out.append(kMagic, 4);
  append_u32_le(out, kCheckpointVersion);
  append_u32_le(out, static_cast<std::uint32_t>(meta_str.size()));
  out += meta_str;
  append_params(out, model.encoder);
  append_params(out, model.decoder);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

VaeModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::string bytes{std::istreambuf_iterator<char>(f),
                    std::istreambuf_iterator<char>()};

  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError(path + ": not a VAEC checkpoint");
  auto read_u32 = [&bytes](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
      v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
    return v;
  };
  const std::uint32_t version = read_u32(4);
  if (version != kCheckpointVersion)
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(version) + " (want " +
                      std::to_string(kCheckpointVersion) + ")");
  const std::uint32_t json_len = read_u32(8);
  if (12 + static_cast<std::size_t>(json_len) > bytes.size())
    throw FormatError(path + ": checkpoint truncated inside metadata");

  json meta;
  try {
    meta = json::parse(bytes.substr(12, json_len));
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad checkpoint metadata: " + e.what());
  }

  VaeSpec spec;
  const auto& js = meta.at("spec");
  spec.latent_dim = js.at("latent_dim").get<int>();
  spec.encoder_hidden = js.at("encoder_hidden").get<std::vector<int>>();
  spec.decoder_hidden = js.at("decoder_hidden").get<std::vector<int>>();
  spec.seed = js.at("seed").get<std::uint64_t>();
  spec.adam.learning_rate = js.at("adam").at("learning_rate").get<double>();
  spec.adam.beta1 = js.at("adam").at("beta1").get<double>();
  spec.adam.beta2 = js.at("adam").at("beta2").get<double>();
  spec.adam.epsilon = js.at("adam").at("epsilon").get<double>();
  spec.epochs = js.at("epochs").get<int>();
  spec.batch_size = js.at("batch_size").get<int>();

  VaeModel model = init_model(spec);
  model.train_set_id = meta.at("train_set_id").get<std::uint64_t>();
  model.held_out = meta.at("held_out").get<int>();
  model.subset = meta.at("subset").get<std::int64_t>();

  ParamReader reader(bytes, 12 + json_len);
  reader.read_into(model.encoder);
  reader.read_into(model.decoder);
  if (reader.offset() != bytes.size())
    throw FormatError(path + ": trailing bytes after parameters");
  return model;
}

}  // namespace vaeprobe::vae
