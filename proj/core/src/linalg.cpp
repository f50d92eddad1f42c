#include "epmine/linalg.hpp"

#include <string>

namespace epmine {

Matrix cross_similarity(const EmbeddingMatrix& query, const EmbeddingMatrix& gallery) {
  if (query.dim() != gallery.dim()) {
    throw DimensionMismatch("query dim " + std::to_string(query.dim()) + " != gallery dim " +
                            std::to_string(gallery.dim()));
  }
  Matrix s(query.rows(), gallery.rows());
  for (std::size_t i = 0; i < query.rows(); ++i) {
    for (std::size_t j = 0; j < gallery.rows(); ++j) {
      s(i, j) = dot<double>(query.row(i), gallery.row(j));
    }
  }
  return s;
}

double squared_distance_from_similarity(double s) {
  if (!(std::abs(s) <= 1.0 + 1e-6)) {
    throw DomainError("similarity " + std::to_string(s) + " outside [-1, 1]");
  }
  const double d2 = 2.0 - 2.0 * s;
  return d2 < 0.0 ? 0.0 : d2;
}

}  // namespace epmine
