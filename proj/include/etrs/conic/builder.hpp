#pragma once

#include <vector>

#include "etrs/conic/solver.hpp"

namespace etrs::conic {

/// Collects constraint blocks  b - A x in K  in any order and lays them out in the
/// canonical zero / nonnegative / SOC / PSD order expected by the solver.
class ProgramBuilder {
 public:
  /// Refers to the rows of one added block, possibly spread over several cone types.
  struct Handle {
    std::vector<std::size_t> pieces;
  };

  explicit ProgramBuilder(int num_vars) : num_vars_(num_vars) {}

  int num_vars() const { return num_vars_; }

  /// Adds rows whose cone is `spec`; rows of A must follow spec's own canonical order.
  Handle add(const ConeSpec& spec, const Mat& A, const Vec& b) {
    spec.validate();
    require_size(A.rows(), spec.dim(), "block rows");
    require_size(A.cols(), num_vars_, "block columns");
    require_size(b.size(), spec.dim(), "block offset");
    Handle h;
    int off = 0;
    auto take = [&](Kind kind, int rows, int size) {
      if (rows == 0) return;
      h.pieces.push_back(pieces_.size());
      pieces_.push_back({kind, size, A.middleRows(off, rows), b.segment(off, rows)});
      off += rows;
    };
    take(Kind::Zero, spec.zero_dim, spec.zero_dim);
    take(Kind::Nonneg, spec.nonneg_dim, spec.nonneg_dim);
    for (int d : spec.soc_dims) take(Kind::Soc, d, d);
    for (int m : spec.psd_side_lengths) take(Kind::Psd, svec_size(m), m);
    return h;
  }

  Handle add_zero(const Mat& A, const Vec& b) {
    ConeSpec s;
    s.zero_dim = static_cast<int>(A.rows());
    return add(s, A, b);
  }

  Handle add_nonneg(const Mat& A, const Vec& b) {
    ConeSpec s;
    s.nonneg_dim = static_cast<int>(A.rows());
    return add(s, A, b);
  }

  ConeProgram build(const Vec& c) {
    require_size(c.size(), num_vars_, "objective");
    ConeProgram p;
    p.c = c;
    int rows = 0;
    for (const auto& pc : pieces_) rows += static_cast<int>(pc.A.rows());
    p.A.resize(rows, num_vars_);
    p.b.resize(rows);
    int r = 0;
    offsets_.assign(pieces_.size(), 0);
    for (Kind kind : {Kind::Zero, Kind::Nonneg, Kind::Soc, Kind::Psd}) {
      for (std::size_t i = 0; i < pieces_.size(); ++i) {
        const auto& pc = pieces_[i];
        if (pc.kind != kind) continue;
        offsets_[i] = r;
        const auto len = pc.A.rows();
        p.A.middleRows(r, len) = pc.A;
        p.b.segment(r, len) = pc.b;
        r += static_cast<int>(len);
        switch (kind) {
          case Kind::Zero: p.cones.zero_dim += static_cast<int>(len); break;
          case Kind::Nonneg: p.cones.nonneg_dim += static_cast<int>(len); break;
          case Kind::Soc: p.cones.soc_dims.push_back(pc.size); break;
          case Kind::Psd: p.cones.psd_side_lengths.push_back(pc.size); break;
        }
      }
    }
    return p;
  }

  /// Entries of a row-indexed vector (multipliers or slacks) belonging to a block, in the
  /// block's own order. Valid after build().
  Vec extract(const Handle& h, const Vec& rowvec) const {
    int len = 0;
    for (std::size_t i : h.pieces) len += static_cast<int>(pieces_[i].A.rows());
    Vec out(len);
    int r = 0;
    for (std::size_t i : h.pieces) {
      const auto n = pieces_[i].A.rows();
      out.segment(r, n) = rowvec.segment(offsets_.at(i), n);
      r += static_cast<int>(n);
    }
    return out;
  }

 private:
  enum class Kind { Zero, Nonneg, Soc, Psd };
  struct Piece {
    Kind kind;
    int size;
    Mat A;
    Vec b;
  };

  int num_vars_;
  std::vector<Piece> pieces_;
  std::vector<int> offsets_;
};

}  // namespace etrs::conic
