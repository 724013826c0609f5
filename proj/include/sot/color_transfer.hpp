#ifndef SOT_COLOR_TRANSFER_HPP
#define SOT_COLOR_TRANSFER_HPP

#include <sot/core.hpp>
#include <sot/image_io.hpp>
#include <sot/parallel.hpp>
#include <sot/sinkhorn.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sot {

struct TransferSpec {
  /// Cutoff on the squared RGB distance; +inf blocks nothing.
  double c_cut = kInf;
  int subsample_size = 64;
  SolverConfig cfg{.epsilon = 0.01, .gamma = 2.0, .max_iter = 20000, .tol = 1e-6,
                   .log_domain = false};

  void validate() const {
    cfg.validate();
    if (subsample_size < 2) throw std::invalid_argument("TransferSpec: subsample_size must be >= 2");
    if (std::isnan(c_cut) || c_cut < 0.0) {
      throw std::invalid_argument("TransferSpec: c_cut must be nonnegative");
    }
  }
};

struct TransferReport {
  PixelCloud output;
  PixelCloud input_small;   // X^s
  PixelCloud target_small;  // Y^s
  SolverResult solve;
  long clamped = 0;  // channel values pulled back into [0, 1]
};

/// Thrown when the coupling solve does not converge; carries everything
/// computed so far.
class TransferError : public std::runtime_error {
 public:
  TransferError(const std::string& what, TransferReport partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  [[nodiscard]] const TransferReport& partial() const { return partial_; }

 private:
  TransferReport partial_;
};

/// Area-averaging resize to size x size: every output pixel is the mean of
/// the input area it covers, partial pixels weighted by overlap.
inline PixelCloud subsample(const PixelCloud& img, int size) {
  if (size < 1 || size > std::min(img.width, img.height)) {
    throw std::invalid_argument("subsample: size " + std::to_string(size) +
                                " must lie in [1, min(width, height)] for a " +
                                std::to_string(img.width) + "x" + std::to_string(img.height) +
                                " image");
  }
  // Per-axis overlap weights of output cell k with input pixel p.
  auto weights = [size](int extent) {
    std::vector<std::vector<std::pair<int, double>>> w(static_cast<std::size_t>(size));
    const double scale = static_cast<double>(extent) / size;
    for (int k = 0; k < size; ++k) {
      const double lo = k * scale;
      const double hi = (k + 1) * scale;
      for (int p = static_cast<int>(std::floor(lo)); p < extent && p < hi; ++p) {
        const double overlap = std::min(hi, p + 1.0) - std::max(lo, static_cast<double>(p));
        if (overlap > 0.0) w[static_cast<std::size_t>(k)].emplace_back(p, overlap / scale);
      }
    }
    return w;
  };
  const auto wx = weights(img.width);
  const auto wy = weights(img.height);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(size) * size, 3);
  for (int oy = 0; oy < size; ++oy) {
    for (int ox = 0; ox < size; ++ox) {
      Eigen::RowVector3d acc = Eigen::RowVector3d::Zero();
      for (const auto& [py, fy] : wy[static_cast<std::size_t>(oy)]) {
        for (const auto& [px, fx] : wx[static_cast<std::size_t>(ox)]) {
          acc += fy * fx * img.colors.row(static_cast<Eigen::Index>(py) * img.width + px);
        }
      }
      out.row(static_cast<Eigen::Index>(oy) * size + ox) = acc.cwiseMax(0.0).cwiseMin(1.0);
    }
  }
  return PixelCloud(std::move(out), size, size);
}

/// Squared RGB distances, +inf where the squared distance exceeds c_cut.
inline CostMatrix color_cost(const Matrix& x, const Matrix& y, double c_cut) {
  Matrix c(x.rows(), y.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      const double d2 = (x.row(i) - y.row(j)).squaredNorm();
      c(i, j) = d2 <= c_cut ? d2 : kInf;
    }
  }
  return CostMatrix(std::move(c));
}

/// For every row of `colors`, the index of the nearest row of `palette`
/// (Euclidean; ties go to the lowest index). Repeated colors are looked up
/// once.
inline std::vector<Eigen::Index> nearest_indices(const Matrix& colors, const Matrix& palette) {
  struct KeyHash {
    std::size_t operator()(const std::array<std::uint64_t, 3>& k) const {
      return std::hash<std::uint64_t>{}(k[0] * 0x9E3779B97F4A7C15ULL ^ k[1] * 0xC2B2AE3D27D4EB4FULL ^
                                        k[2]);
    }
  };
  auto key = [&](Eigen::Index i) {
    std::array<std::uint64_t, 3> k{};
    for (int c = 0; c < 3; ++c) std::memcpy(&k[c], &colors(i, c), sizeof(double));
    return k;
  };
  std::unordered_map<std::array<std::uint64_t, 3>, std::size_t, KeyHash> slot;
  std::vector<Eigen::Index> first;  // a representative pixel per distinct color
  std::vector<std::size_t> of_pixel(static_cast<std::size_t>(colors.rows()));
  for (Eigen::Index i = 0; i < colors.rows(); ++i) {
    const auto [it, inserted] = slot.try_emplace(key(i), first.size());
    if (inserted) first.push_back(i);
    of_pixel[static_cast<std::size_t>(i)] = it->second;
  }
  std::vector<Eigen::Index> best(first.size(), 0);
  parallel_for(0, first.size(), [&](std::size_t u) {
    const auto row = colors.row(first[u]);
    double best_d = kInf;
    for (Eigen::Index j = 0; j < palette.rows(); ++j) {
      const double d = (palette.row(j) - row).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best[u] = j;
      }
    }
  });
  std::vector<Eigen::Index> out(static_cast<std::size_t>(colors.rows()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = best[of_pixel[i]];
  return out;
}

/// X^out_i = X_i + sum_j P_{N(i) j} (Y^s_j - X^s_{N(i)}) / a^s_{N(i)}, i.e. the
/// input color moved by the displacement its nearest subsampled color
/// receives under the coupling. Channels are clamped to [0, 1]; `clamped`
/// counts the clamped values.
inline PixelCloud recolor(const PixelCloud& input, const Matrix& xs, const Matrix& ys,
                          const TransportPlan& plan, const Vector& a_s, long* clamped = nullptr) {
  const Matrix py = plan.matrix() * ys;
  const Vector rows = plan.matrix().rowwise().sum();
  Matrix shift(xs.rows(), 3);
  for (Eigen::Index k = 0; k < xs.rows(); ++k) {
    if (a_s[k] > 0.0) {
      shift.row(k) = (py.row(k) - rows[k] * xs.row(k)) / a_s[k];
    } else {
      shift.row(k).setZero();
    }
  }
  const auto nearest = nearest_indices(input.colors, xs);
  Matrix out(input.colors.rows(), 3);
  long count = 0;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = input.colors(i, c) + shift(nearest[static_cast<std::size_t>(i)], c);
      const double w = std::clamp(v, 0.0, 1.0);
      if (w != v) ++count;
      out(i, c) = w;
    }
  }
  if (clamped) *clamped = count;
  return PixelCloud(std::move(out), input.width, input.height);
}

/// Color transfer from `target` onto `input`: subsample both, couple the
/// uniform distributions on the subsampled colors under the cutoff cost,
/// then recolor every input pixel through its nearest subsampled color.
inline TransferReport transfer(const PixelCloud& input, const PixelCloud& target,
                               const TransferSpec& spec) {
  spec.validate();
  TransferReport r;
  r.input_small = subsample(input, std::min({spec.subsample_size, input.width, input.height}));
  r.target_small =
      subsample(target, std::min({spec.subsample_size, target.width, target.height}));
  const Matrix& xs = r.input_small.colors;
  const Matrix& ys = r.target_small.colors;
  const Marginal a(Vector::Constant(xs.rows(), 1.0 / static_cast<double>(xs.rows())));
  const Marginal b(Vector::Constant(ys.rows(), 1.0 / static_cast<double>(ys.rows())));
  r.solve = solve(a, b, color_cost(xs, ys, spec.c_cut), spec.cfg);
  r.output = recolor(input, xs, ys, r.solve.plan, a.weights(), &r.clamped);
  if (!r.solve.converged) {
    throw TransferError("color transfer: coupling did not converge in " +
                            std::to_string(r.solve.iterations) + " iterations (transported mass " +
                            std::to_string(r.solve.transported_mass) + ")",
                        std::move(r));
  }
  return r;
}

}  // namespace sot

#endif  // SOT_COLOR_TRANSFER_HPP
