#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latentcolor/image.hpp"

namespace latentcolor {

// Returned by psnr() when the images are identical.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// 10 log10(max_value^2 / MSE) over all RGB samples.
double psnr(const RgbImage& a, const RgbImage& b, double max_value = 1.0);

struct SsimOptions {
  int64_t window = 8;        // side of the sliding mean-pooling window
  double dynamic_range = 1.0;
  double k1 = 0.01;
  double k2 = 0.03;
};

// Mean of local SSIM over every window position (stride 1, no padding).
double ssim(const GrayImage& a, const GrayImage& b, const SsimOptions& opts = {});

// Gaussian fit of a feature cloud.
struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // unbiased (n - 1) normalisation
  int64_t count = 0;

  int64_t dim() const { return mean.size(); }
};

// Two-pass batch statistics of row-wise samples. Needs >= 2 rows.
FeatureStats compute_stats(const Eigen::MatrixXd& samples);

// Streaming (Welford) accumulation of the same statistics.
class FeatureAccumulator {
 public:
  explicit FeatureAccumulator(int64_t dim);
  void add(const Eigen::VectorXd& x);
  FeatureStats stats() const;
  int64_t count() const { return count_; }

 private:
  int64_t count_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
};

// |mu_p - mu_q|^2 + tr(S_p + S_q - 2 (S_p S_q)^{1/2}). The trace of the
// matrix root is taken through the symmetric form S_p^{1/2} S_q S_p^{1/2};
// round-off negative eigenvalues are clamped to zero.
double frechet(const FeatureStats& p, const FeatureStats& q);

// Maps an image to a fixed-length feature vector.
class ImageEmbedder {
 public:
  virtual ~ImageEmbedder() = default;
  virtual std::string id() const = 0;
  virtual int64_t dim() const = 0;
  virtual Eigen::VectorXd embed(const RgbImage& img) const = 0;
};

// Maps a clip (ordered frames) to a fixed-length feature vector.
class ClipEmbedder {
 public:
  virtual ~ClipEmbedder() = default;
  virtual std::string id() const = 0;
  virtual int64_t dim() const = 0;
  virtual Eigen::VectorXd embed(std::span<const RgbImage> clip) const = 0;
};

// Per-channel mean colour (3 features).
class MeanColorEmbedder final : public ImageEmbedder {
 public:
  std::string id() const override { return "mean-color-v1"; }
  int64_t dim() const override { return 3; }
  Eigen::VectorXd embed(const RgbImage& img) const override;
};

// Per-channel means over a 2x2 grid of quadrants plus per-channel standard
// deviations (15 features).
class PooledColorEmbedder final : public ImageEmbedder {
 public:
  std::string id() const override { return "pooled-color-v1"; }
  int64_t dim() const override { return 15; }
  Eigen::VectorXd embed(const RgbImage& img) const override;
};

// Frame-averaged image features followed by per-channel mean absolute
// frame-to-frame differences.
class PooledClipEmbedder final : public ClipEmbedder {
 public:
  explicit PooledClipEmbedder(std::shared_ptr<const ImageEmbedder> frame_embedder);
  std::string id() const override;
  int64_t dim() const override;
  Eigen::VectorXd embed(std::span<const RgbImage> clip) const override;

 private:
  std::shared_ptr<const ImageEmbedder> frame_;
};

// Looks up a built-in embedder by id; throws ConfigError for unknown ids.
std::shared_ptr<const ImageEmbedder> make_image_embedder(const std::string& id);
std::shared_ptr<const ClipEmbedder> make_clip_embedder(const std::string& image_embedder_id);

double fid(std::span<const RgbImage> frames_a, std::span<const RgbImage> frames_b, const ImageEmbedder& e);
double fvd(std::span<const std::vector<RgbImage>> clips_a, std::span<const std::vector<RgbImage>> clips_b,
           const ClipEmbedder& e);

// Mean over consecutive pairs of the mean absolute (Cb, Cr) difference.
double temporal_consistency_score(std::span<const RgbImage> frames);

}  // namespace latentcolor
