#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <vector>

#include "eshield/common.hpp"

namespace eshield::spectral {

enum class Provenance { embedding_batch, image_patches };

struct PatchGeometry {
  int patch_side = 0;
  int channels = 0;
  int height = 0;  // cropped height actually patched
  int width = 0;   // cropped width
  bool cropped = false;
};

// Rows = observations, columns = features.
struct SampleMatrix {
  Eigen::MatrixXd data;
  bool centered = false;
  Provenance provenance = Provenance::embedding_batch;
  std::optional<PatchGeometry> patch_geometry;
};

// Channel-last row-major image buffer.
struct ImageBuffer {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> pixels;  // height * width * channels

  double& at(int y, int x, int ch) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + ch]; }
  double at(int y, int x, int ch) const { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + ch]; }
};

struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;   // descending
  Eigen::MatrixXd eigenvectors;  // column i pairs with eigenvalue i
  int source_rows = 0;
  int source_cols = 0;
};

struct CausalProjector {
  Eigen::MatrixXd basis;  // p x k orthonormal
  int rank() const { return static_cast<int>(basis.cols()); }
};

// (1/n) X^T X after optional column centering.
inline Eigen::MatrixXd covariance(const SampleMatrix& sample, bool center) {
  const auto n = sample.data.rows();
  if (n < 2) throw std::invalid_argument("covariance: need at least 2 observations");
  if (!center) {
    return (sample.data.transpose() * sample.data) / static_cast<double>(n);
  }
  Eigen::MatrixXd x = sample.data.rowwise() - sample.data.colwise().mean();
  return (x.transpose() * x) / static_cast<double>(n);
}

// Flip each column so its largest-magnitude component is positive; ties
// broken by the lowest index. Makes the decomposition a pure function of
// the matrix for simple spectra.
inline void canonicalize_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
      const double a = std::abs(vectors(i, j));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (vectors(best, j) < 0.0) vectors.col(j) = -vectors.col(j);
  }
}

// Full symmetric eigendecomposition, descending eigenvalues, canonical signs.
SpectralDecomposition symmetric_eig(const Eigen::MatrixXd& m);

// Non-overlapping k x k x C patches as rows; crops bottom/right to the
// largest multiple of k and flags the crop.
SampleMatrix patch_matrix(const ImageBuffer& image, int patch_side);

// Exact inverse of patch_matrix on its output.
ImageBuffer reassemble(const SampleMatrix& sample);

inline CausalProjector build_projector(const SpectralDecomposition& decomp,
                                       const std::vector<int>& indices) {
  if (indices.empty()) throw std::invalid_argument("build_projector: empty index set");
  const auto p = decomp.eigenvectors.rows();
  CausalProjector proj;
  proj.basis.resize(p, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t m = 0; m < indices.size(); ++m) {
    if (indices[m] < 0 || indices[m] >= p) {
      throw std::out_of_range("build_projector: index outside [0, p)");
    }
    proj.basis.col(static_cast<Eigen::Index>(m)) = decomp.eigenvectors.col(indices[m]);
  }
  return proj;
}

inline Eigen::VectorXd project(const Eigen::VectorXd& vec, const CausalProjector& projector) {
  if (vec.size() != projector.basis.rows()) {
    throw std::invalid_argument("project: dimension mismatch");
  }
  return projector.basis * (projector.basis.transpose() * vec);
}

inline SampleMatrix project_rows(const SampleMatrix& sample, const CausalProjector& projector) {
  if (sample.data.cols() != projector.basis.rows()) {
    throw std::invalid_argument("project_rows: dimension mismatch");
  }
  SampleMatrix out = sample;
  out.data = (sample.data * projector.basis) * projector.basis.transpose();
  return out;
}

}  // namespace eshield::spectral
