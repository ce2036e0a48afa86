#include "cdm/datastreams.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cdm/errors.hpp"

namespace cdm {

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m, std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  if (m.empty()) return Eigen::MatrixXd::Identity(d, d);
  if (m.rows() != dim || m.cols() != dim) throw ConfigError("covariance must be a d x d matrix");
  Eigen::MatrixXd out(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out(i, j) = m(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  }
  return out;
}

// Throws `Err` unless cov is symmetric positive definite.
template <typename Err>
Eigen::LLT<Eigen::MatrixXd> checked_cholesky(const Eigen::MatrixXd& cov) {
  if (!cov.allFinite() || !cov.isApprox(cov.transpose(), 1e-12)) throw Err("covariance is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw Err("covariance is not positive definite");
  return llt;
}

}  // namespace

bool StreamReplay::next(Sample& out) {
  if (pos_ >= stream_->size()) return false;
  const auto row = stream_->features.row(pos_);
  out.x.assign(row.begin(), row.end());
  out.label = stream_->labels[pos_];
  ++pos_;
  return true;
}

void GaussianMixtureConfig::validate() const {
  if (pre.empty()) throw ConfigError("mixture needs at least one class");
  if (post.size() != pre.size()) throw ConfigError("post-change mixture must list every class");
  if (priors.size() != pre.size()) throw ConfigError("mixture needs one prior per class");
  const std::size_t d = dim();
  if (d == 0) throw ConfigError("class means must be non-empty");
  double sum = 0.0;
  for (double p : priors) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("class priors must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("class priors must sum to 1");
  for (const auto* group : {&pre, &post}) {
    for (const auto& c : *group) {
      if (c.mean.size() != d) throw ConfigError("all class means must have the same dimension");
      for (double v : c.mean) {
        if (!std::isfinite(v)) throw ConfigError("class means must be finite");
      }
      checked_cholesky<ConfigError>(to_eigen(c.covariance, d));
    }
  }
}

GaussianMixtureConfig gaussian_mixture(const std::vector<std::vector<double>>& means) {
  GaussianMixtureConfig cfg;
  for (const auto& m : means) cfg.pre.push_back({m, Matrix{}});
  cfg.post = cfg.pre;
  cfg.priors.assign(means.size(), means.empty() ? 0.0 : 1.0 / static_cast<double>(means.size()));
  return cfg;
}

GaussianMixtureConfig two_class_gaussian(double delta) { return gaussian_mixture({{0.0, 0.0}, {delta, 0.0}}); }

GaussianMixtureSampler::GaussianMixtureSampler(GaussianMixtureConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t d = config_.dim();
  auto factor = [d](const GaussianClass& c) {
    const Eigen::MatrixXd l = checked_cholesky<ConfigError>(to_eigen(c.covariance, d)).matrixL();
    Factor f{c.mean, std::vector<double>(d * d)};
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) f.lower[i * d + j] = l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    return f;
  };
  for (const auto& c : config_.pre) pre_.push_back(factor(c));
  for (const auto& c : config_.post) post_.push_back(factor(c));
  double acc = 0.0;
  for (double p : config_.priors) cdf_.push_back(acc += p);
}

Label GaussianMixtureSampler::draw_label(Rng& rng) const {
  const double u = rng.uniform() * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  return static_cast<Label>(idx + 1);
}

void GaussianMixtureSampler::draw(Label label, bool post_change, Rng& rng, std::span<double> x) const {
  const Factor& f = (post_change ? post_ : pre_)[static_cast<std::size_t>(label - 1)];
  const std::size_t d = f.mean.size();
  double z[64];
  std::vector<double> z_heap;
  double* zp = z;
  if (d > 64) {
    z_heap.resize(d);
    zp = z_heap.data();
  }
  for (std::size_t i = 0; i < d; ++i) zp[i] = rng.normal();
  for (std::size_t i = 0; i < d; ++i) {
    double v = f.mean[i];
    for (std::size_t j = 0; j <= i; ++j) v += f.lower[i * d + j] * zp[j];
    x[i] = v;
  }
}

GaussianStreamSource::GaussianStreamSource(std::shared_ptr<const GaussianMixtureSampler> sampler,
                                           std::size_t length, std::uint64_t seed)
    : sampler_(std::move(sampler)), length_(length), rng_(seed) {
  if (sampler_->config().tau > length_) throw ConfigError("change point tau exceeds the stream length");
}

bool GaussianStreamSource::next(Sample& out) {
  if (t_ >= length_) return false;
  ++t_;
  const Label y = sampler_->draw_label(rng_);
  out.x.resize(sampler_->config().dim());
  sampler_->draw(y, t_ > sampler_->config().tau, rng_, out.x);
  out.label = y;
  return true;
}

LabeledStream generate_stream(const GaussianMixtureConfig& config, std::size_t length, std::uint64_t seed) {
  if (length == 0) throw ConfigError("stream length must be at least 1");
  auto sampler = std::make_shared<const GaussianMixtureSampler>(config);
  GaussianStreamSource source(sampler, length, seed);
  LabeledStream stream(config.dim());
  stream.features.reserve_rows(length);
  stream.source = "gaussian";
  stream.tau = config.tau;
  stream.seed = seed;
  Sample s;
  while (source.next(s)) stream.add(s.x, s.label);
  return stream;
}

LabeledSet draw_training_set(const GaussianMixtureSampler& sampler, std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t d = sampler.config().dim();
  LabeledSet out(d);
  out.features.reserve_rows(per_class * sampler.config().num_classes());
  std::vector<double> x(d);
  for (std::size_t m = 1; m <= sampler.config().num_classes(); ++m) {
    for (std::size_t i = 0; i < per_class; ++i) {
      sampler.draw(static_cast<Label>(m), false, rng, x);
      out.add(x, static_cast<Label>(m));
    }
  }
  return out;
}

double skl_gaussian(std::span<const double> mean0, const Matrix& cov0, std::span<const double> mean1,
                    const Matrix& cov1) {
  if (mean0.size() != mean1.size() || mean0.empty()) throw InputError("means must have equal, positive dimension");
  const std::size_t dim = mean0.size();
  const auto d = static_cast<Eigen::Index>(dim);
  const Eigen::MatrixXd s0 = to_eigen(cov0, dim);
  const Eigen::MatrixXd s1 = to_eigen(cov1, dim);
  const auto llt0 = checked_cholesky<NumericError>(s0);
  const auto llt1 = checked_cholesky<NumericError>(s1);
  const Eigen::VectorXd diff = Eigen::Map<const Eigen::VectorXd>(mean1.data(), d) -
                               Eigen::Map<const Eigen::VectorXd>(mean0.data(), d);
  const double logdet0 = 2.0 * Eigen::MatrixXd(llt0.matrixL()).diagonal().array().log().sum();
  const double logdet1 = 2.0 * Eigen::MatrixXd(llt1.matrixL()).diagonal().array().log().sum();
  // KL(P||Q) = (tr(Sq^-1 Sp) + diff' Sq^-1 diff - d + log|Sq| - log|Sp|) / 2
  const double kl01 = 0.5 * (llt1.solve(s0).trace() + diff.dot(llt1.solve(diff)) - static_cast<double>(dim) +
                             logdet1 - logdet0);
  const double kl10 = 0.5 * (llt0.solve(s1).trace() + diff.dot(llt0.solve(diff)) - static_cast<double>(dim) +
                             logdet0 - logdet1);
  return std::max(0.0, 0.5 * (kl01 + kl10));
}

LabeledStream splice_streams(const LabeledStream& pre, const LabeledStream& post, std::size_t tau) {
  if (pre.dim() != post.dim()) throw InputError("cannot splice streams of different dimension");
  if (pre.size() < tau) {
    throw InputError("pre-change stream has " + std::to_string(pre.size()) + " samples, tau = " +
                     std::to_string(tau));
  }
  LabeledStream out(pre.dim());
  out.features.reserve_rows(tau + post.size());
  for (std::size_t t = 0; t < tau; ++t) out.add(pre.features.row(t), pre.labels[t]);
  for (std::size_t t = 0; t < post.size(); ++t) out.add(post.features.row(t), post.labels[t]);
  out.source = "splice(" + pre.source + "," + post.source + ")";
  out.tau = tau;
  return out;
}

std::pair<LabeledSet, LabeledSet> subsample_without_replacement(const LabeledSet& dataset,
                                                                std::span<const std::size_t> counts,
                                                                std::uint64_t seed) {
  const auto available = dataset.class_counts();
  for (std::size_t m = 0; m < counts.size(); ++m) {
    const std::size_t have = m < available.size() ? available[m] : 0;
    if (counts[m] > have) {
      throw ConfigError("class " + std::to_string(m + 1) + " has " + std::to_string(have) +
                        " samples, " + std::to_string(counts[m]) + " requested");
    }
  }
  std::vector<std::vector<std::size_t>> by_class(std::max(available.size(), counts.size()));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_class[static_cast<std::size_t>(dataset.labels[i] - 1)].push_back(i);
  }
  Rng rng(seed);
  std::vector<bool> chosen(dataset.size(), false);
  for (std::size_t m = 0; m < counts.size(); ++m) {
    auto& idx = by_class[m];
    // Partial Fisher-Yates: the first counts[m] entries become the draw.
    for (std::size_t i = 0; i < counts[m]; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
      std::swap(idx[i], idx[j]);
      chosen[idx[i]] = true;
    }
  }
  LabeledSet drawn(dataset.dim());
  LabeledSet rest(dataset.dim());
  for (std::size_t m = 0; m < counts.size(); ++m) {
    for (std::size_t i = 0; i < counts[m]; ++i) {
      drawn.add(dataset.features.row(by_class[m][i]), dataset.labels[by_class[m][i]]);
    }
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!chosen[i]) rest.add(dataset.features.row(i), dataset.labels[i]);
  }
  return {std::move(drawn), std::move(rest)};
}

}  // namespace cdm
