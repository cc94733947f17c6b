#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vaeprobe/common.hpp"
#include "vaeprobe/mnist.hpp"
#include "vaeprobe/nn.hpp"

namespace vaeprobe::vae {

struct VaeSpec {
  int latent_dim = 50;
  std::vector<int> encoder_hidden{400};
  std::vector<int> decoder_hidden{400};
  std::uint64_t seed = 0;
  nn::AdamConfig adam;
  int epochs = 50;
  int batch_size = 100;
};

/// Gaussian encoder (784 -> [means; log-variances]) plus Bernoulli decoder
/// (latent -> 784 pre-sigmoid logits). Provenance fields identify the
/// training set the model was fit on.
struct VaeModel {
  VaeSpec spec;
  nn::DenseNet encoder;
  nn::DenseNet decoder;
  std::uint64_t train_set_id = 0;
  int held_out = -1;      // -1: trained on all digits
  std::int64_t subset = -1;  // -1: full training set
};

VaeModel init_model(const VaeSpec& spec);

struct GaussianPosterior {
  Vec mean;
  Vec log_variance;
};

struct ElboTerms {
  double reconstruction_bce = 0.0;
  double kl = 0.0;
  double negative_elbo() const { return reconstruction_bce + kl; }
};

GaussianPosterior encode(const VaeModel& model, const Vec& pixels);

/// z = mean + exp(0.5 * log_variance) .* noise
Vec reparameterize(const GaussianPosterior& post, const Vec& noise);

Vec decode_logits(const VaeModel& model, const Vec& z);
/// Bernoulli means: sigmoid of the decoder logits.
Vec decode(const VaeModel& model, const Vec& z);

/// -sum_j [t_j log p_j + (1 - t_j) log(1 - p_j)], probs clamped away from
/// {0,1} internally.
double bce(const Vec& target, const Vec& probs);
/// Same quantity computed from logits (softplus form; no clamping needed).
double bce_from_logits(const Vec& target, const Vec& logits);

/// KL(q || N(0, I)) in closed form: 0.5 * sum(m^2 + v - 1 - log v).
double kl_to_prior(const GaussianPosterior& post);

/// Single-example negative ELBO with a fixed reparameterization draw.
ElboTerms elbo_terms(const VaeModel& model, const Vec& pixels, const Vec& noise);

/// Full analytic gradient of the fixed-noise negative ELBO with respect to
/// every encoder and decoder parameter. Buffers must be zeros_like the nets.
ElboTerms elbo_gradients(const VaeModel& model, const Vec& pixels,
                         const Vec& noise, nn::GradientBuffer& encoder_grads,
                         nn::GradientBuffer& decoder_grads);

/// Batched variant (columns are examples); accumulates summed gradients and
/// returns summed loss terms. This is the code path the trainer runs.
ElboTerms elbo_batch_gradients(const VaeModel& model, const Mat& pixels,
                               const Mat& noise,
                               nn::GradientBuffer& encoder_grads,
                               nn::GradientBuffer& decoder_grads);

struct TrainResult {
  VaeModel model;
  std::vector<ElboTerms> history;  // one entry per epoch, epoch-mean terms
};

using EpochCallback = std::function<void(int epoch, const ElboTerms&)>;

/// Minibatch Adam on the reparameterized negative ELBO, one noise draw per
/// example per step. The training order is derived from the seed alone:
/// images are brought into a canonical content order before the seeded
/// shuffle, so storage order cannot affect the trajectory.
TrainResult train(const VaeSpec& spec, const std::vector<mnist::Image>& train_set,
                  const EpochCallback& on_epoch = nullptr);

void write_history_csv(const std::vector<ElboTerms>& history,
                       const std::string& path);

/// Binary checkpoint: magic "VAEC", little-endian u32 version and JSON
/// length, JSON metadata, then every parameter as little-endian f64 in
/// declared layer order (encoder first, row-major weights then bias).
/// Round-trips bit-exactly.
void save_checkpoint(const VaeModel& model, const std::string& path);
VaeModel load_checkpoint(const std::string& path);

}  // namespace vaeprobe::vae
