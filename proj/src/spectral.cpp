#include "eshield/spectral.hpp"

namespace eshield::spectral {

SpectralDecomposition symmetric_eig(const Eigen::MatrixXd& m) {
  const auto p = m.rows();
  if (m.cols() != p) throw std::invalid_argument("symmetric_eig: matrix must be square");
  if (!m.allFinite()) throw std::runtime_error("symmetric_eig: non-finite entries");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (m + m.transpose()));
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("symmetric_eig: eigensolver failed");
  }

  SpectralDecomposition decomp;
  decomp.eigenvalues = solver.eigenvalues().reverse();
  decomp.eigenvectors = solver.eigenvectors().rowwise().reverse();
  decomp.source_rows = static_cast<int>(p);
  decomp.source_cols = static_cast<int>(p);
  canonicalize_signs(decomp.eigenvectors);
  return decomp;
}

SampleMatrix patch_matrix(const ImageBuffer& image, int patch_side) {
  const int k = patch_side;
  if (k < 1 || k > std::min(image.height, image.width)) {
    throw std::domain_error("patch_matrix: patch side exceeds image dimensions");
  }
  PatchGeometry geom;
  geom.patch_side = k;
  geom.channels = image.channels;
  geom.height = (image.height / k) * k;
  geom.width = (image.width / k) * k;
  geom.cropped = geom.height != image.height || geom.width != image.width;

  const int py = geom.height / k;
  const int px = geom.width / k;
  const int p = k * k * image.channels;

  SampleMatrix sample;
  sample.provenance = Provenance::image_patches;
  sample.patch_geometry = geom;
  sample.data.resize(static_cast<Eigen::Index>(py) * px, p);
  for (int by = 0; by < py; ++by) {
    for (int bx = 0; bx < px; ++bx) {
      const Eigen::Index row = static_cast<Eigen::Index>(by) * px + bx;
      int col = 0;
      for (int dy = 0; dy < k; ++dy)
        for (int dx = 0; dx < k; ++dx)
          for (int ch = 0; ch < image.channels; ++ch)
            sample.data(row, col++) = image.at(by * k + dy, bx * k + dx, ch);
    }
  }
  return sample;
}

ImageBuffer reassemble(const SampleMatrix& sample) {
  if (sample.provenance != Provenance::image_patches || !sample.patch_geometry) {
    throw std::invalid_argument("reassemble: sample lacks patch geometry");
  }
  const PatchGeometry& geom = *sample.patch_geometry;
  const int k = geom.patch_side;
  const int py = geom.height / k;
  const int px = geom.width / k;
  if (sample.data.rows() != static_cast<Eigen::Index>(py) * px ||
      sample.data.cols() != static_cast<Eigen::Index>(k) * k * geom.channels) {
    throw std::invalid_argument("reassemble: data shape inconsistent with geometry");
  }

  ImageBuffer image;
  image.height = geom.height;
  image.width = geom.width;
  image.channels = geom.channels;
  image.pixels.assign(static_cast<std::size_t>(geom.height) * geom.width * geom.channels, 0.0);
  for (int by = 0; by < py; ++by) {
    for (int bx = 0; bx < px; ++bx) {
      const Eigen::Index row = static_cast<Eigen::Index>(by) * px + bx;
      int col = 0;
      for (int dy = 0; dy < k; ++dy)
        for (int dx = 0; dx < k; ++dx)
          for (int ch = 0; ch < geom.channels; ++ch)
            image.at(by * k + dy, bx * k + dx, ch) = sample.data(row, col++);
    }
  }
  return image;
}

}  // namespace eshield::spectral
