#include "latentcolor/metrics.hpp"

#include <cmath>
#include <sstream>

#include "latentcolor/color_space.hpp"
#include "latentcolor/errors.hpp"

namespace latentcolor {
namespace {

namespace F = torch::nn::functional;

Eigen::VectorXd to_vector(const torch::Tensor& t) {
  auto d = t.to(torch::kFloat64).contiguous();
  Eigen::VectorXd v(d.numel());
  std::copy(d.data_ptr<double>(), d.data_ptr<double>() + d.numel(), v.data());
  return v;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Clamped eigendecomposition square root of a symmetric PSD matrix.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetrize(m));
  if (solver.info() != Eigen::Success) {
    throw NumericalError(std::string("eigendecomposition failed for ") + what);
  }
  const auto& ev = solver.eigenvalues();
  const double largest = ev.cwiseAbs().maxCoeff();
  if (ev.minCoeff() < -1e-6 * std::max(1.0, largest)) {
    std::ostringstream msg;
    msg << what << " is not positive semidefinite: eigenvalue range [" << ev.minCoeff() << ", "
        << ev.maxCoeff() << "]";
    throw NumericalError(msg.str());
  }
  Eigen::VectorXd root = ev.unaryExpr([](double x) { return std::sqrt(std::max(x, 0.0)); });
  return solver.eigenvectors() * root.asDiagonal() * solver.eigenvectors().transpose();
}

}  // namespace

double psnr(const RgbImage& a, const RgbImage& b, double max_value) {
  if (!same_size(a, b)) throw ShapeError("psnr: image sizes differ");
  if (!(max_value > 0.0)) throw ConfigError("psnr: max_value must be positive");
  const double mse = (a.tensor().to(torch::kFloat64) - b.tensor().to(torch::kFloat64)).pow(2).mean().item<double>();
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(max_value * max_value / mse);
}

double ssim(const GrayImage& a, const GrayImage& b, const SsimOptions& opts) {
  if (!same_size(a, b)) throw ShapeError("ssim: image sizes differ");
  if (a.height() < opts.window || a.width() < opts.window) {
    throw ShapeError("ssim: image smaller than the " + std::to_string(opts.window) + "x" +
                     std::to_string(opts.window) + " window");
  }
  const double c1 = std::pow(opts.k1 * opts.dynamic_range, 2);
  const double c2 = std::pow(opts.k2 * opts.dynamic_range, 2);
  auto x = a.tensor().to(torch::kFloat64).unsqueeze(0).unsqueeze(0);
  auto y = b.tensor().to(torch::kFloat64).unsqueeze(0).unsqueeze(0);
  auto pool = [&](const torch::Tensor& t) {
    return F::avg_pool2d(t, F::AvgPool2dFuncOptions(opts.window).stride(1));
  };
  auto mu_x = pool(x);
  auto mu_y = pool(y);
  auto var_x = pool(x * x) - mu_x * mu_x;
  auto var_y = pool(y * y) - mu_y * mu_y;
  auto cov = pool(x * y) - mu_x * mu_y;
  auto num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2);
  auto den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2);
  return (num / den).mean().item<double>();
}

FeatureStats compute_stats(const Eigen::MatrixXd& samples) {
  if (samples.rows() < 2) throw ValidationError("feature statistics need at least 2 samples");
  FeatureStats s;
  s.count = samples.rows();
  s.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - s.mean.transpose();
  s.covariance = symmetrize(centered.transpose() * centered / static_cast<double>(s.count - 1));
  return s;
}

FeatureAccumulator::FeatureAccumulator(int64_t dim)
    : mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::MatrixXd::Zero(dim, dim)) {}

void FeatureAccumulator::add(const Eigen::VectorXd& x) {
  if (x.size() != mean_.size()) throw ShapeError("feature dimension mismatch");
  ++count_;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (x - mean_).transpose();
}

FeatureStats FeatureAccumulator::stats() const {
  if (count_ < 2) throw ValidationError("feature statistics need at least 2 samples");
  return {mean_, symmetrize(m2_ / static_cast<double>(count_ - 1)), count_};
}

double frechet(const FeatureStats& p, const FeatureStats& q) {
  if (p.dim() != q.dim() || p.covariance.rows() != p.dim() || q.covariance.rows() != q.dim()) {
    throw ShapeError("frechet: feature dimensions differ");
  }
  const double mean_term = (p.mean - q.mean).squaredNorm();
  const Eigen::MatrixXd root_p = psd_sqrt(p.covariance, "first covariance");
  const Eigen::MatrixXd inner = root_p * q.covariance * root_p;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetrize(inner));
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "frechet: matrix square root failed; covariance traces " << p.covariance.trace() << ", "
        << q.covariance.trace();
    throw NumericalError(msg.str());
  }
  double trace_root = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double ev = solver.eigenvalues()[i];
    trace_root += std::sqrt(std::max(ev, 0.0));
  }
  const double d = mean_term + p.covariance.trace() + q.covariance.trace() - 2.0 * trace_root;
  return std::max(0.0, d);
}

Eigen::VectorXd MeanColorEmbedder::embed(const RgbImage& img) const {
  return to_vector(img.tensor().to(torch::kFloat64).mean({1, 2}));
}

Eigen::VectorXd PooledColorEmbedder::embed(const RgbImage& img) const {
  auto t = img.tensor().to(torch::kFloat64).unsqueeze(0);
  auto quadrants = F::adaptive_avg_pool2d(t, F::AdaptiveAvgPool2dFuncOptions({2, 2}));  // [1, 3, 2, 2]
  auto stds = t[0].flatten(1).std(1, /*unbiased=*/false);
  return to_vector(torch::cat({quadrants.flatten(), stds}));
}

PooledClipEmbedder::PooledClipEmbedder(std::shared_ptr<const ImageEmbedder> frame_embedder)
    : frame_(std::move(frame_embedder)) {
  if (!frame_) throw ConfigError("clip embedder needs a frame embedder");
}

std::string PooledClipEmbedder::id() const { return "pooled-clip-v1[" + frame_->id() + "]"; }

int64_t PooledClipEmbedder::dim() const { return frame_->dim() + 3; }

Eigen::VectorXd PooledClipEmbedder::embed(std::span<const RgbImage> clip) const {
  if (clip.empty()) throw ValidationError("cannot embed an empty clip");
  Eigen::VectorXd frames = Eigen::VectorXd::Zero(frame_->dim());
  for (const auto& f : clip) frames += frame_->embed(f);
  frames /= static_cast<double>(clip.size());
  Eigen::VectorXd motion = Eigen::VectorXd::Zero(3);
  for (std::size_t i = 1; i < clip.size(); ++i) {
    motion += to_vector((clip[i].tensor().to(torch::kFloat64) - clip[i - 1].tensor().to(torch::kFloat64))
                            .abs()
                            .mean({1, 2}));
  }
  if (clip.size() > 1) motion /= static_cast<double>(clip.size() - 1);
  Eigen::VectorXd out(dim());
  out << frames, motion;
  return out;
}

std::shared_ptr<const ImageEmbedder> make_image_embedder(const std::string& id) {
  if (id == "mean-color-v1") return std::make_shared<MeanColorEmbedder>();
  if (id == "pooled-color-v1") return std::make_shared<PooledColorEmbedder>();
  throw ConfigError("unknown embedder id: " + id);
}

std::shared_ptr<const ClipEmbedder> make_clip_embedder(const std::string& image_embedder_id) {
  return std::make_shared<PooledClipEmbedder>(make_image_embedder(image_embedder_id));
}

double fid(std::span<const RgbImage> frames_a, std::span<const RgbImage> frames_b, const ImageEmbedder& e) {
  if (frames_a.size() < 2 || frames_b.size() < 2) throw ValidationError("fid needs at least 2 frames per side");
  FeatureAccumulator acc_a(e.dim()), acc_b(e.dim());
  for (const auto& f : frames_a) acc_a.add(e.embed(f));
  for (const auto& f : frames_b) acc_b.add(e.embed(f));
  return frechet(acc_a.stats(), acc_b.stats());
}

double fvd(std::span<const std::vector<RgbImage>> clips_a, std::span<const std::vector<RgbImage>> clips_b,
           const ClipEmbedder& e) {
  if (clips_a.size() < 2 || clips_b.size() < 2) throw ValidationError("fvd needs at least 2 clips per side");
  FeatureAccumulator acc_a(e.dim()), acc_b(e.dim());
  for (const auto& c : clips_a) acc_a.add(e.embed(c));
  for (const auto& c : clips_b) acc_b.add(e.embed(c));
  return frechet(acc_a.stats(), acc_b.stats());
}

double temporal_consistency_score(std::span<const RgbImage> frames) {
  if (frames.size() < 2) throw ValidationError("temporal consistency needs at least 2 frames");
  double total = 0.0;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!same_size(frames[i], frames[i - 1])) throw ShapeError("temporal consistency: frame sizes differ");
    total += (chroma(frames[i]) - chroma(frames[i - 1])).abs().mean().item<double>();
  }
  return total / static_cast<double>(frames.size() - 1);
}

}  // namespace latentcolor
