#include "orient/model.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

#include "orient/errors.hpp"
#include "orient/parallel.hpp"
#include "orient/rng.hpp"

namespace orient {
namespace {

std::atomic<std::uint64_t> g_stamp_counter{1};

std::uint64_t next_stamp() { return g_stamp_counter.fetch_add(1, std::memory_order_relaxed); }

constexpr std::array<const char*, kNumLayers> kLayerNames{"point1", "point2", "point3", "head1",
                                                         "head2"};

// Clouds per gradient-accumulation block. Fixed so the reduction order never
// depends on the worker count.
constexpr std::size_t kReduceBlock = 8;

void check_classes(int num_classes) {
  if (num_classes < 2) {
    throw std::invalid_argument("class count must be >= 2, got " + std::to_string(num_classes));
  }
}

}  // namespace

std::vector<ParamSegment> param_layout(int num_classes) {
  // Segments start on 64-byte boundaries so vectorized kernels see the same
  // alignment, hence the same rounding, for every copy of the parameters.
  constexpr std::size_t kAlignDoubles = 8;
  auto aligned_offset = [](std::size_t n) { return (n + kAlignDoubles - 1) / kAlignDoubles * kAlignDoubles; };
  check_classes(num_classes);
  const std::array<std::pair<int, int>, kNumLayers> shapes{{{3, kPointHidden1},
                                                            {kPointHidden1, kPointHidden2},
                                                            {kPointHidden2, kFeatureDim},
                                                            {kFeatureDim, kHeadHidden},
                                                            {kHeadHidden, num_classes}}};
  std::vector<ParamSegment> out;
  std::size_t offset = 0;
  for (int l = 0; l < kNumLayers; ++l) {
    const auto [in, outw] = shapes[static_cast<std::size_t>(l)];
    ParamSegment w{std::string(kLayerNames[static_cast<std::size_t>(l)]) + ".weight", in, outw,
                   offset, false};
    offset = aligned_offset(offset + w.size());
    ParamSegment b{std::string(kLayerNames[static_cast<std::size_t>(l)]) + ".bias", outw, 1, offset,
                   true};
    offset = aligned_offset(offset + b.size());
    out.push_back(std::move(w));
    out.push_back(std::move(b));
  }
  return out;
}

ModelParams::ModelParams(int num_classes)
    : num_classes_(num_classes), segments_(param_layout(num_classes)), stamp_(next_stamp()) {
  const auto& last = segments_.back();
  values_.assign(last.offset + last.size(), 0.0);
}

ModelParams::ModelParams(const ModelParams& other)
    : num_classes_(other.num_classes_),
      values_(other.values_),
      segments_(other.segments_),
      stamp_(next_stamp()) {}

ModelParams& ModelParams::operator=(const ModelParams& other) {
  if (this != &other) {
    num_classes_ = other.num_classes_;
    values_ = other.values_;
    segments_ = other.segments_;
    touch();
  }
  return *this;
}

void ModelParams::touch() { stamp_ = next_stamp(); }

std::span<double> ModelParams::mutable_values() {
  touch();
  return values_;
}

const ParamSegment& ModelParams::weight_segment(Layer layer) const {
  return segments_[2 * static_cast<std::size_t>(layer)];
}

const ParamSegment& ModelParams::bias_segment(Layer layer) const {
  return segments_[2 * static_cast<std::size_t>(layer) + 1];
}

Eigen::Map<const RowMatrix> ModelParams::weight(Layer layer) const {
  const auto& s = weight_segment(layer);
  return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const Vector> ModelParams::bias(Layer layer) const {
  const auto& s = bias_segment(layer);
  return {values_.data() + s.offset, s.rows};
}

Eigen::Map<RowMatrix> ModelParams::mutable_weight(Layer layer) {
  touch();
  const auto& s = weight_segment(layer);
  return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<Vector> ModelParams::mutable_bias(Layer layer) {
  touch();
  const auto& s = bias_segment(layer);
  return {values_.data() + s.offset, s.rows};
}

bool ModelParams::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

ModelParams init_params(std::uint64_t seed, int num_classes) {
  ModelParams params(num_classes);
  Rng rng = make_stream(seed, {stream::kInit});
  auto values = params.mutable_values();
  for (const auto& seg : params.segments()) {
    if (seg.is_bias) continue;
    const double bound = std::sqrt(6.0 / static_cast<double>(seg.rows));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < seg.size(); ++i) values[seg.offset + i] = dist(rng);
  }
  return params;
}

namespace {

void forward_cloud(const ModelParams& p, const PointCloud& cloud, CloudCache& c,
                   Eigen::Ref<Eigen::RowVectorXd> logits) {
  if (cloud.points.rows() < 1) {
    throw std::invalid_argument("forward: cloud " + std::to_string(cloud.id) + " has no points");
  }
  const auto& x = cloud.points;
  c.h1.noalias() = x * p.weight(Layer::point1);
  c.h1.rowwise() += p.bias(Layer::point1).transpose();
  c.h1 = c.h1.cwiseMax(0.0);

  c.h2.noalias() = c.h1 * p.weight(Layer::point2);
  c.h2.rowwise() += p.bias(Layer::point2).transpose();
  c.h2 = c.h2.cwiseMax(0.0);

  RowMatrix h3 = c.h2 * p.weight(Layer::point3);
  h3.rowwise() += p.bias(Layer::point3).transpose();

  // Max pool with lowest-index tie breaking; ReLU commutes with max.
  Eigen::Matrix<double, 1, kFeatureDim> best = h3.row(0);
  c.argmax.fill(0);
  for (Eigen::Index r = 1; r < h3.rows(); ++r) {
    for (int ch = 0; ch < kFeatureDim; ++ch) {
      if (h3(r, ch) > best(ch)) {
        best(ch) = h3(r, ch);
        c.argmax[static_cast<std::size_t>(ch)] = r;
      }
    }
  }
  c.feature = best.transpose().cwiseMax(0.0);

  c.hidden = (p.weight(Layer::head1).transpose() * c.feature + p.bias(Layer::head1)).cwiseMax(0.0);
  logits = (p.weight(Layer::head2).transpose() * c.hidden + p.bias(Layer::head2)).transpose();
}

// Accumulates the gradient of one cloud into `grad` and writes its point
// gradient into `dpoints`.
void backward_cloud(const ModelParams& p, const CloudCache& c, const Eigen::RowVectorXd& dlogit,
                    const Eigen::RowVectorXd* dfeature, ModelParams& grad, Points& dpoints) {
  const auto w2 = p.weight(Layer::point2);
  const auto w3 = p.weight(Layer::point3);
  const auto w4 = p.weight(Layer::head1);
  const auto w5 = p.weight(Layer::head2);

  auto gw5 = grad.mutable_weight(Layer::head2);
  auto gb5 = grad.mutable_bias(Layer::head2);
  auto gw4 = grad.mutable_weight(Layer::head1);
  auto gb4 = grad.mutable_bias(Layer::head1);
  auto gw3 = grad.mutable_weight(Layer::point3);
  auto gb3 = grad.mutable_bias(Layer::point3);
  auto gw2 = grad.mutable_weight(Layer::point2);
  auto gb2 = grad.mutable_bias(Layer::point2);
  auto gw1 = grad.mutable_weight(Layer::point1);
  auto gb1 = grad.mutable_bias(Layer::point1);

  const Vector dl = dlogit.transpose();
  gw5.noalias() += c.hidden * dl.transpose();
  gb5 += dl;
  Vector dz4 = w5 * dl;
  dz4 = (c.hidden.array() > 0.0).select(dz4, 0.0);
  gw4.noalias() += c.feature * dz4.transpose();
  gb4 += dz4;
  Vector df = w4 * dz4;
  if (dfeature != nullptr) df += dfeature->transpose();

  const Eigen::Index n = c.input.rows();
  dpoints = Points::Zero(n, 3);

  // Rows of the point MLP that receive gradient through the max pool.
  std::vector<Eigen::Index> slot(static_cast<std::size_t>(n), -1);
  std::vector<Eigen::Index> rows;
  rows.reserve(kFeatureDim);
  RowMatrix dh2(kFeatureDim, kPointHidden2);
  for (int ch = 0; ch < kFeatureDim; ++ch) {
    const double g = df(ch);
    if (g == 0.0 || !(c.feature(ch) > 0.0)) continue;
    const Eigen::Index a = c.argmax[static_cast<std::size_t>(ch)];
    auto& s = slot[static_cast<std::size_t>(a)];
    if (s < 0) {
      s = static_cast<Eigen::Index>(rows.size());
      rows.push_back(a);
      dh2.row(s).setZero();
    }
    gw3.col(ch).noalias() += g * c.h2.row(a).transpose();
    gb3(ch) += g;
    dh2.row(s).noalias() += g * w3.col(ch).transpose();
  }
  if (rows.empty()) return;

  const auto r = static_cast<Eigen::Index>(rows.size());
  RowMatrix h2r(r, kPointHidden2);
  RowMatrix h1r(r, kPointHidden1);
  Points xr(r, 3);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto row = rows[static_cast<std::size_t>(i)];
    h2r.row(i) = c.h2.row(row);
    h1r.row(i) = c.h1.row(row);
    xr.row(i) = c.input.row(row);
  }
  RowMatrix dz2 = (h2r.array() > 0.0).select(dh2.topRows(r), 0.0);
  gw2.noalias() += h1r.transpose() * dz2;
  gb2 += dz2.colwise().sum().transpose();
  RowMatrix dh1 = dz2 * w2.transpose();
  RowMatrix dz1 = (h1r.array() > 0.0).select(dh1, 0.0);
  gw1.noalias() += xr.transpose() * dz1;
  gb1 += dz1.colwise().sum().transpose();
  const Points dx = dz1 * p.weight(Layer::point1).transpose();
  for (Eigen::Index i = 0; i < r; ++i) dpoints.row(rows[static_cast<std::size_t>(i)]) = dx.row(i);
}

}  // namespace

ForwardOutput forward(const ModelParams& params, std::span<const PointCloud> batch, int workers,
                      CacheMode mode) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  ForwardOutput out;
  out.features.resize(b, kFeatureDim);
  out.logits.resize(b, params.num_classes());
  out.cache.params_stamp = params.stamp();
  out.cache.num_classes = params.num_classes();
  for (const auto& cloud : batch) {
    if (cloud.points.rows() < 1) {
      throw std::invalid_argument("forward: cloud " + std::to_string(cloud.id) + " has no points");
    }
  }

  if (mode == CacheMode::keep) {
    out.cache.clouds.resize(batch.size());
    parallel_for(batch.size(), workers, [&](std::size_t i) {
      forward_cloud(params, batch[i], out.cache.clouds[i], out.logits.row(static_cast<Eigen::Index>(i)));
      out.cache.clouds[i].input = batch[i].points;
    });
  } else {
    parallel_for(batch.size(), workers, [&](std::size_t i) {
      CloudCache scratch;
      forward_cloud(params, batch[i], scratch, out.logits.row(static_cast<Eigen::Index>(i)));
      out.features.row(static_cast<Eigen::Index>(i)) = scratch.feature.transpose();
    });
    return out;
  }
  for (Eigen::Index i = 0; i < b; ++i) {
    out.features.row(i) = out.cache.clouds[static_cast<std::size_t>(i)].feature.transpose();
  }
  return out;
}

Gradients backward(const ModelParams& params, const ForwardCache& cache, const RowMatrix& dlogits,
                   const RowMatrix& dfeatures, int workers) {
  if (cache.params_stamp != params.stamp() || cache.num_classes != params.num_classes()) {
    throw invalid_state("backward: forward cache does not match the current parameters");
  }
  const auto b = static_cast<Eigen::Index>(cache.clouds.size());
  if (dlogits.rows() != b || dlogits.cols() != params.num_classes()) {
    throw invalid_state("backward: upstream logit gradient is " + std::to_string(dlogits.rows()) +
                        "x" + std::to_string(dlogits.cols()) + ", cache holds " +
                        std::to_string(b) + " clouds");
  }
  const bool has_dfeatures = dfeatures.size() != 0;
  if (has_dfeatures && (dfeatures.rows() != b || dfeatures.cols() != kFeatureDim)) {
    throw invalid_state("backward: upstream feature gradient shape does not match the cache");
  }

  Gradients out{ModelParams(params.num_classes()), std::vector<Points>(cache.clouds.size())};
  const std::size_t blocks = (cache.clouds.size() + kReduceBlock - 1) / kReduceBlock;
  std::vector<ModelParams> partial(blocks, ModelParams(params.num_classes()));
  parallel_for(blocks, workers, [&](std::size_t blk) {
    const std::size_t end = std::min(cache.clouds.size(), (blk + 1) * kReduceBlock);
    for (std::size_t i = blk * kReduceBlock; i < end; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const Eigen::RowVectorXd dl = dlogits.row(row);
      Eigen::RowVectorXd df;
      if (has_dfeatures) df = dfeatures.row(row);
      backward_cloud(params, cache.clouds[i], dl, has_dfeatures ? &df : nullptr, partial[blk],
                     out.points[i]);
    }
  });

  auto total = out.params.mutable_values();
  for (const auto& part : partial) {
    const auto v = part.values();
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += v[k];
  }
  return out;
}

}  // namespace orient
