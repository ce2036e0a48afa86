#ifndef CDM_DATASTREAMS_HPP_
#define CDM_DATASTREAMS_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cdm/labeled.hpp"
#include "cdm/matrix.hpp"
#include "cdm/random.hpp"

namespace cdm {

/// Ordered labeled samples with provenance.
struct LabeledStream {
  Matrix features;
  std::vector<std::optional<Label>> labels;
  std::string source;
  std::optional<std::size_t> tau;
  std::optional<std::uint64_t> seed;

  LabeledStream() = default;
  explicit LabeledStream(std::size_t dim) : features(Matrix::with_cols(dim)) {}

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }
  void add(std::span<const double> x, std::optional<Label> y) {
    features.push_row(x);
    labels.push_back(y);
  }
  Sample sample(std::size_t t) const {
    const auto row = features.row(t);
    return {{row.begin(), row.end()}, labels[t]};
  }
};

/// Pull-based sample stream.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  /// Writes the next sample into `out`; false when the stream is exhausted.
  virtual bool next(Sample& out) = 0;
};

/// Replays a materialized stream.
class StreamReplay final : public SampleSource {
 public:
  explicit StreamReplay(std::shared_ptr<const LabeledStream> stream) : stream_(std::move(stream)) {}
  bool next(Sample& out) override;

 private:
  std::shared_ptr<const LabeledStream> stream_;
  std::size_t pos_ = 0;
};

/// Multivariate normal class-conditional. An empty covariance means identity.
struct GaussianClass {
  std::vector<double> mean;
  Matrix covariance;
};

/// Mixture with one Gaussian per class, before and after the change point.
/// Classes absent from a drift keep their pre-change distribution.
struct GaussianMixtureConfig {
  std::vector<GaussianClass> pre;
  std::vector<GaussianClass> post;
  std::vector<double> priors;
  std::size_t tau = 0;

  std::size_t num_classes() const noexcept { return pre.size(); }
  std::size_t dim() const noexcept { return pre.empty() ? 0 : pre.front().mean.size(); }

  /// Throws ConfigError unless priors form a probability vector, dimensions
  /// agree and every covariance is symmetric positive definite.
  void validate() const;
};

/// Identity-covariance mixture with the given class means; post-change equal
/// to pre-change, uniform priors, tau = 0.
GaussianMixtureConfig gaussian_mixture(const std::vector<std::vector<double>>& means);

/// The two-class planar setting: class 1 at (0, 0), class 2 at (delta, 0).
GaussianMixtureConfig two_class_gaussian(double delta = 2.0);

/// Sampler for a validated mixture. Cholesky factors are computed once.
class GaussianMixtureSampler {
 public:
  explicit GaussianMixtureSampler(GaussianMixtureConfig config);

  const GaussianMixtureConfig& config() const noexcept { return config_; }
  Label draw_label(Rng& rng) const;
  /// x ~ class-conditional of `label`, from the post-change variant if
  /// `post_change`.
  void draw(Label label, bool post_change, Rng& rng, std::span<double> x) const;

 private:
  struct Factor {
    std::vector<double> mean;
    std::vector<double> lower;  // row-major Cholesky factor
  };
  GaussianMixtureConfig config_;
  std::vector<Factor> pre_;
  std::vector<Factor> post_;
  std::vector<double> cdf_;
};

/// Lazily generated mixture stream: samples 1..tau from the pre-change
/// class-conditionals, later ones from the post-change ones.
class GaussianStreamSource final : public SampleSource {
 public:
  GaussianStreamSource(std::shared_ptr<const GaussianMixtureSampler> sampler, std::size_t length,
                       std::uint64_t seed);
  bool next(Sample& out) override;

 private:
  std::shared_ptr<const GaussianMixtureSampler> sampler_;
  std::size_t length_;
  std::size_t t_ = 0;
  Rng rng_;
};

/// Materialized stream of `length` samples. Throws ConfigError when
/// tau > length or the configuration is invalid.
LabeledStream generate_stream(const GaussianMixtureConfig& config, std::size_t length, std::uint64_t seed);

/// `per_class` samples from each pre-change class-conditional.
LabeledSet draw_training_set(const GaussianMixtureSampler& sampler, std::size_t per_class, std::uint64_t seed);

/// Symmetrized Kullback-Leibler divergence (KL(P||Q) + KL(Q||P)) / 2 between
/// two Gaussians. Empty covariances mean identity. Throws NumericError when a
/// covariance is not positive definite.
double skl_gaussian(std::span<const double> mean0, const Matrix& cov0, std::span<const double> mean1,
                    const Matrix& cov1);

/// First tau samples of `pre` followed by all of `post`. Throws InputError on
/// a dimension mismatch or when `pre` is shorter than tau.
LabeledStream splice_streams(const LabeledStream& pre, const LabeledStream& post, std::size_t tau);

/// Draws counts[m-1] samples of class m without replacement. Returns the
/// drawn set and the remaining samples (original order). Throws ConfigError
/// naming the class when it has too few samples.
std::pair<LabeledSet, LabeledSet> subsample_without_replacement(const LabeledSet& dataset,
                                                                std::span<const std::size_t> counts,
                                                                std::uint64_t seed);

}  // namespace cdm

#endif  // CDM_DATASTREAMS_HPP_
