#include "tdg/conditioning.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "tdg/io/pfm.hpp"

namespace tdg {

Tensor5::Tensor5(int b_, int c_, int f_, int h_, int w_, float fill)
    : b(b_), c(c_), f(f_), h(h_), w(w_),
      data(static_cast<size_t>(b_) * c_ * f_ * h_ * w_, fill) {
    if (b_ < 1 || c_ < 1 || f_ < 1 || h_ < 1 || w_ < 1)
        throw std::invalid_argument("Tensor5: dims must be positive");
}

void NoiseSchedule::validate() const {
    if (alpha.size() != sigma.size() || alpha.size() < 2)
        throw std::invalid_argument("schedule: needs >= 2 matched steps");
    for (size_t t = 0; t < alpha.size(); ++t) {
        double vp = alpha[t] * alpha[t] + sigma[t] * sigma[t];
        if (std::abs(vp - 1.0) > 1e-6)
            throw std::invalid_argument("schedule: alpha^2 + sigma^2 != 1");
        if (t > 0 && (alpha[t] >= alpha[t - 1] || sigma[t] <= sigma[t - 1]))
            throw std::invalid_argument("schedule: alpha must decrease, sigma increase");
    }
}

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
    if (steps < 2) throw std::invalid_argument("make_schedule: N must be >= 2");
    if (beta_start <= 0 || beta_end <= beta_start || beta_end >= 1)
        throw std::invalid_argument("make_schedule: need 0 < beta_start < beta_end < 1");
    NoiseSchedule s;
    s.alpha.resize(steps);
    s.sigma.resize(steps);
    double sqrt_s = std::sqrt(beta_start), sqrt_e = std::sqrt(beta_end);
    double alpha_bar = 1.0;
    for (int t = 0; t < steps; ++t) {
        double root = sqrt_s + (sqrt_e - sqrt_s) * t / (steps - 1);
        alpha_bar *= 1.0 - root * root;
        s.alpha[t] = std::sqrt(alpha_bar);
        s.sigma[t] = std::sqrt(1.0 - alpha_bar);
    }
    s.validate();
    return s;
}

namespace {

constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

void encode_frame(const ImageF& rgb, int factor, Tensor5& out, int frame) {
    for (int by = 0; by < out.h; ++by)
        for (int bx = 0; bx < out.w; ++bx) {
            double mean[3] = {0, 0, 0};
            double luma_sum = 0, luma_sq = 0;
            const int count = factor * factor;
            for (int dy = 0; dy < factor; ++dy)
                for (int dx = 0; dx < factor; ++dx) {
                    int y = by * factor + dy, x = bx * factor + dx;
                    double r = rgb.at(y, x, 0), g = rgb.at(y, x, 1), b = rgb.at(y, x, 2);
                    mean[0] += r;
                    mean[1] += g;
                    mean[2] += b;
                    double luma = kLumaR * r + kLumaG * g + kLumaB * b;
                    luma_sum += luma;
                    luma_sq += luma * luma;
                }
            for (int c = 0; c < 3; ++c) out.at(0, c, frame, by, bx) = static_cast<float>(mean[c] / count);
            double lm = luma_sum / count;
            double var = std::max(luma_sq / count - lm * lm, 0.0);
            out.at(0, 3, frame, by, bx) = static_cast<float>(std::sqrt(var));
        }
}

void check_schedule_index(int t, const NoiseSchedule& sched) {
    if (t < 0 || t >= sched.size()) throw std::invalid_argument("timestep out of range");
}

Tensor5 axpy(const Tensor5& a, double ca, const Tensor5& b, double cb) {
    if (!a.same_shape(b)) throw std::invalid_argument("tensor shape mismatch");
    Tensor5 out = a;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = static_cast<float>(ca * a.data[i] + cb * b.data[i]);
    return out;
}

}  // namespace

Tensor5 mock_encode_image(const ImageF& rgb, int factor) {
    if (rgb.c != 3) throw std::invalid_argument("mock_encode: needs 3 channels");
    if (factor < 1 || rgb.h % factor != 0 || rgb.w % factor != 0)
        throw std::invalid_argument("mock_encode: dimensions not divisible by factor");
    Tensor5 out(1, 4, 1, rgb.h / factor, rgb.w / factor);
    encode_frame(rgb, factor, out, 0);
    return out;
}

Tensor5 mock_encode_video(const std::vector<ImageF>& frames, int factor) {
    if (frames.empty()) throw std::invalid_argument("mock_encode: no frames");
    for (const ImageF& f : frames)
        if (f.c != 3 || f.h != frames[0].h || f.w != frames[0].w)
            throw std::invalid_argument("mock_encode: inconsistent frames");
    if (factor < 1 || frames[0].h % factor != 0 || frames[0].w % factor != 0)
        throw std::invalid_argument("mock_encode: dimensions not divisible by factor");
    Tensor5 out(1, 4, static_cast<int>(frames.size()), frames[0].h / factor,
                frames[0].w / factor);
    for (size_t f = 0; f < frames.size(); ++f)
        encode_frame(frames[f], factor, out, static_cast<int>(f));
    return out;
}

Tensor5 noisy_latent(const Tensor5& z0, const Tensor5& eps, int t, const NoiseSchedule& sched) {
    check_schedule_index(t, sched);
    return axpy(z0, sched.alpha[t], eps, sched.sigma[t]);
}

Tensor5 v_target(const Tensor5& z0, const Tensor5& eps, int t, const NoiseSchedule& sched) {
    check_schedule_index(t, sched);
    return axpy(eps, sched.alpha[t], z0, -sched.sigma[t]);
}

Tensor5 recover_z0(const Tensor5& zt, const Tensor5& v, int t, const NoiseSchedule& sched) {
    check_schedule_index(t, sched);
    return axpy(zt, sched.alpha[t], v, -sched.sigma[t]);
}

Tensor5 recover_eps(const Tensor5& zt, const Tensor5& v, int t, const NoiseSchedule& sched) {
    check_schedule_index(t, sched);
    return axpy(zt, sched.sigma[t], v, sched.alpha[t]);
}

Tensor5 assemble_denoiser_input(const Tensor5& zt, const Tensor5& agnostic_lat,
                                const Tensor5& mask_resized, const Tensor5& body_lat,
                                const Tensor5& guidance_lat, const ConditionFlags& flags) {
    const Tensor5* blocks[5] = {&zt, &agnostic_lat, &mask_resized, &body_lat, &guidance_lat};
    const int expected_c[5] = {4, 4, 1, 4, 4};
    for (int i = 0; i < 5; ++i) {
        const Tensor5& x = *blocks[i];
        if (x.c != expected_c[i])
            throw std::invalid_argument("assemble_denoiser_input: channel budget violated");
        if (x.b != zt.b || x.f != zt.f || x.h != zt.h || x.w != zt.w)
            throw std::invalid_argument("assemble_denoiser_input: shape mismatch");
    }
    Tensor5 out(zt.b, 17, zt.f, zt.h, zt.w);
    int co = 0;
    for (int i = 0; i < 5; ++i) {
        const Tensor5& x = *blocks[i];
        bool zero = (i == 4) && flags.drop_guidance;
        for (int ci = 0; ci < x.c; ++ci, ++co)
            for (int bi = 0; bi < out.b; ++bi)
                for (int fi = 0; fi < out.f; ++fi)
                    for (int hi = 0; hi < out.h; ++hi)
                        for (int wi = 0; wi < out.w; ++wi)
                            out.at(bi, co, fi, hi, wi) = zero ? 0.0f : x.at(bi, ci, fi, hi, wi);
    }
    return out;
}

DenoiserInputParts split_denoiser_input(const Tensor5& assembled) {
    if (assembled.c != 17)
        throw std::invalid_argument("split_denoiser_input: expected 17 channels");
    DenoiserInputParts parts;
    Tensor5* blocks[5] = {&parts.zt, &parts.agnostic, &parts.mask, &parts.body, &parts.guidance};
    const int widths[5] = {4, 4, 1, 4, 4};
    int co = 0;
    for (int i = 0; i < 5; ++i) {
        *blocks[i] = Tensor5(assembled.b, widths[i], assembled.f, assembled.h, assembled.w);
        for (int ci = 0; ci < widths[i]; ++ci, ++co)
            for (int bi = 0; bi < assembled.b; ++bi)
                for (int fi = 0; fi < assembled.f; ++fi)
                    for (int hi = 0; hi < assembled.h; ++hi)
                        for (int wi = 0; wi < assembled.w; ++wi)
                            blocks[i]->at(bi, ci, fi, hi, wi) = assembled.at(bi, co, fi, hi, wi);
    }
    return parts;
}

Tensor5 reference_concat(const Tensor5& latent, const Tensor5& cloth_feat,
                         const Tensor5& tryon_feat) {
    for (const Tensor5* ref : {&cloth_feat, &tryon_feat}) {
        if (ref->f != 1) throw std::invalid_argument("reference_concat: features must have f == 1");
        if (ref->b != latent.b || ref->c != latent.c || ref->h != latent.h || ref->w != latent.w)
            throw std::invalid_argument("reference_concat: shape mismatch");
    }
    Tensor5 out(latent.b, latent.c, latent.f, latent.h, 3 * latent.w);
    for (int bi = 0; bi < out.b; ++bi)
        for (int ci = 0; ci < out.c; ++ci)
            for (int fi = 0; fi < out.f; ++fi)
                for (int hi = 0; hi < out.h; ++hi) {
                    for (int wi = 0; wi < latent.w; ++wi) {
                        out.at(bi, ci, fi, hi, wi) = latent.at(bi, ci, fi, hi, wi);
                        out.at(bi, ci, fi, hi, latent.w + wi) = cloth_feat.at(bi, ci, 0, hi, wi);
                        out.at(bi, ci, fi, hi, 2 * latent.w + wi) =
                            tryon_feat.at(bi, ci, 0, hi, wi);
                    }
                }
    return out;
}

ReferenceParts reference_split(const Tensor5& combined) {
    if (combined.w % 3 != 0)
        throw std::invalid_argument("reference_split: width not divisible by 3");
    const int w = combined.w / 3;
    ReferenceParts parts;
    parts.latent = Tensor5(combined.b, combined.c, combined.f, combined.h, w);
    parts.cloth = Tensor5(combined.b, combined.c, 1, combined.h, w);
    parts.tryon = Tensor5(combined.b, combined.c, 1, combined.h, w);
    for (int bi = 0; bi < combined.b; ++bi)
        for (int ci = 0; ci < combined.c; ++ci)
            for (int fi = 0; fi < combined.f; ++fi)
                for (int hi = 0; hi < combined.h; ++hi)
                    for (int wi = 0; wi < w; ++wi) {
                        parts.latent.at(bi, ci, fi, hi, wi) = combined.at(bi, ci, fi, hi, wi);
                        float cloth = combined.at(bi, ci, fi, hi, w + wi);
                        float tryon = combined.at(bi, ci, fi, hi, 2 * w + wi);
                        if (fi == 0) {
                            parts.cloth.at(bi, ci, 0, hi, wi) = cloth;
                            parts.tryon.at(bi, ci, 0, hi, wi) = tryon;
                        } else if (cloth != parts.cloth.at(bi, ci, 0, hi, wi) ||
                                   tryon != parts.tryon.at(bi, ci, 0, hi, wi)) {
                            throw std::invalid_argument(
                                "reference_split: replicas differ across frames");
                        }
                    }
    return parts;
}

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

TrainingDraw sample_training_batch(std::mt19937_64& rng, const MixConfig& cfg) {
    for (double p : {cfg.tau, cfg.p_drop_cloth, cfg.p_drop_tryon, cfg.p_drop_guidance})
        if (p < 0 || p > 1) throw std::invalid_argument("sample: probabilities must be in [0,1]");
    TrainingDraw draw;
    double r = uniform01(rng);
    if (r < cfg.tau) {
        draw.source = SourceKind::Image;
        draw.freeze_temporal = true;
    } else {
        draw.source = SourceKind::Video;
        draw.freeze_temporal = false;
    }
    draw.flags.drop_cloth = uniform01(rng) < cfg.p_drop_cloth;
    draw.flags.drop_tryon = uniform01(rng) < cfg.p_drop_tryon;
    draw.flags.drop_guidance = uniform01(rng) < cfg.p_drop_guidance;
    return draw;
}

TrainingDraw sample_training_batch(uint64_t seed, const MixConfig& cfg) {
    std::mt19937_64 rng(seed);
    return sample_training_batch(rng, cfg);
}

void save_tensor_stack(const std::string& dir, const std::string& name, const Tensor5& t) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["name"] = name;
    manifest["shape"] = {t.b, t.c, t.f, t.h, t.w};
    manifest["layout"] = "one single-channel PFM per (b, c, f) slice";
    std::vector<std::string> files;
    for (int bi = 0; bi < t.b; ++bi)
        for (int ci = 0; ci < t.c; ++ci)
            for (int fi = 0; fi < t.f; ++fi) {
                char suffix[64];
                std::snprintf(suffix, sizeof(suffix), "_b%02d_c%02d_f%04d.pfm", bi, ci, fi);
                std::string file = name + suffix;
                ImageF slice(t.h, t.w, 1);
                for (int hi = 0; hi < t.h; ++hi)
                    for (int wi = 0; wi < t.w; ++wi) slice.at(hi, wi) = t.at(bi, ci, fi, hi, wi);
                write_pfm((fs::path(dir) / file).string(), slice);
                files.push_back(file);
            }
    manifest["files"] = files;
    std::ofstream out((fs::path(dir) / (name + "_shape.json")).string());
    if (!out) throw std::runtime_error("save_tensor_stack: cannot write manifest");
    out << manifest.dump(1) << '\n';
}

Tensor5 load_tensor_stack(const std::string& dir, const std::string& name) {
    namespace fs = std::filesystem;
    std::ifstream in((fs::path(dir) / (name + "_shape.json")).string());
    if (!in) throw std::runtime_error("load_tensor_stack: missing manifest for " + name);
    nlohmann::json manifest;
    in >> manifest;
    auto shape = manifest.at("shape");
    Tensor5 t(shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>(), shape[3].get<int>(),
              shape[4].get<int>());
    size_t idx = 0;
    auto files = manifest.at("files").get<std::vector<std::string>>();
    for (int bi = 0; bi < t.b; ++bi)
        for (int ci = 0; ci < t.c; ++ci)
            for (int fi = 0; fi < t.f; ++fi) {
                ImageF slice = read_pfm((fs::path(dir) / files.at(idx++)).string());
                if (slice.h != t.h || slice.w != t.w || slice.c != 1)
                    throw std::runtime_error("load_tensor_stack: slice shape mismatch");
                for (int hi = 0; hi < t.h; ++hi)
                    for (int wi = 0; wi < t.w; ++wi) t.at(bi, ci, fi, hi, wi) = slice.at(hi, wi);
            }
    return t;
}

}  // namespace tdg
