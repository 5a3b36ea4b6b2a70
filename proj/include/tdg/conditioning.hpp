#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tdg/image.hpp"

namespace tdg {

// Dense (batch, channels, frames, height, width) float tensor, b-major.
struct Tensor5 {
    int b = 0, c = 0, f = 0, h = 0, w = 0;
    std::vector<float> data;

    Tensor5() = default;
    Tensor5(int b_, int c_, int f_, int h_, int w_, float fill = 0.0f);

    size_t size() const { return data.size(); }
    bool same_shape(const Tensor5& o) const {
        return b == o.b && c == o.c && f == o.f && h == o.h && w == o.w;
    }
    size_t offset(int bi, int ci, int fi, int hi, int wi) const {
        return ((((static_cast<size_t>(bi) * c + ci) * f + fi) * h + hi) * w) + wi;
    }
    float& at(int bi, int ci, int fi, int hi, int wi) { return data[offset(bi, ci, fi, hi, wi)]; }
    float at(int bi, int ci, int fi, int hi, int wi) const {
        return data[offset(bi, ci, fi, hi, wi)];
    }
};

// Variance-preserving schedule: alpha_t^2 + sigma_t^2 = 1, alpha decreasing.
struct NoiseSchedule {
    std::vector<double> alpha;
    std::vector<double> sigma;

    int size() const { return static_cast<int>(alpha.size()); }
    void validate() const;
};

// Scaled-linear beta schedule (sqrt-interpolated betas, squared), cumulative
// product alphas. Defaults beta in [1e-4, 0.02]; a stand-in for the SD1.5
// schedule. N >= 2.
NoiseSchedule make_schedule(int steps, double beta_start = 1e-4, double beta_end = 0.02);

// Deterministic VAE stand-in: 4 channels per 8x8 block =
// (mean R, mean G, mean B, population std of Rec.601 luma).
Tensor5 mock_encode_image(const ImageF& rgb, int factor = 8);
Tensor5 mock_encode_video(const std::vector<ImageF>& frames, int factor = 8);

// z_t = alpha_t z0 + sigma_t eps.
Tensor5 noisy_latent(const Tensor5& z0, const Tensor5& eps, int t, const NoiseSchedule& sched);
// v = alpha_t eps - sigma_t z0.
Tensor5 v_target(const Tensor5& z0, const Tensor5& eps, int t, const NoiseSchedule& sched);
// z0 = alpha_t z_t - sigma_t v.
Tensor5 recover_z0(const Tensor5& zt, const Tensor5& v, int t, const NoiseSchedule& sched);
// eps = sigma_t z_t + alpha_t v.
Tensor5 recover_eps(const Tensor5& zt, const Tensor5& v, int t, const NoiseSchedule& sched);

struct ConditionFlags {
    bool drop_cloth = false;
    bool drop_tryon = false;
    bool drop_guidance = false;
};

// Channel-concatenated denoiser input in the documented order
// [z_t(4) | agnostic(4) | mask(1) | body(4) | guidance(4)] = 17 channels.
// drop_guidance zeroes the guidance block (the cloth/tryon flags act on the
// reference path, not here). Any other channel budget is rejected.
Tensor5 assemble_denoiser_input(const Tensor5& zt, const Tensor5& agnostic_lat,
                                const Tensor5& mask_resized, const Tensor5& body_lat,
                                const Tensor5& guidance_lat, const ConditionFlags& flags);

// Splits an assembled input back into its five blocks (exact inverse).
struct DenoiserInputParts {
    Tensor5 zt, agnostic, mask, body, guidance;
};
DenoiserInputParts split_denoiser_input(const Tensor5& assembled);

// Reference features are single-frame (f == 1); both are replicated along
// the frame dimension and concatenated with the latent along width:
// [latent | cloth | tryon], width 3w.
Tensor5 reference_concat(const Tensor5& latent, const Tensor5& cloth_feat,
                         const Tensor5& tryon_feat);

struct ReferenceParts {
    Tensor5 latent, cloth, tryon;  // cloth/tryon collapsed back to f == 1
};
// Exact inverse of reference_concat; throws if the replicas disagree.
ReferenceParts reference_split(const Tensor5& combined);

enum class SourceKind { Image, Video };

struct TrainingDraw {
    SourceKind source = SourceKind::Video;
    bool freeze_temporal = false;
    ConditionFlags flags;
};

struct MixConfig {
    double tau = 0.3;  // image fraction
    double p_drop_cloth = 0.1;
    double p_drop_tryon = 0.1;
    double p_drop_guidance = 0.1;
};

// r ~ U(0,1); r < tau selects Image with the temporal module frozen. The
// three dropout flags are drawn independently. The uniform draw comes from
// the top 53 bits of the generator, so results are identical across
// platforms for a given seed.
TrainingDraw sample_training_batch(std::mt19937_64& rng, const MixConfig& cfg);
TrainingDraw sample_training_batch(uint64_t seed, const MixConfig& cfg);

// PFM stack + JSON shape manifest for downstream training code.
void save_tensor_stack(const std::string& dir, const std::string& name, const Tensor5& t);
Tensor5 load_tensor_stack(const std::string& dir, const std::string& name);

}  // namespace tdg
