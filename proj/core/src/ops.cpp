#define EIGEN_DONT_PARALLELIZE
#include "amt/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>

#include "amt/threads.hpp"

namespace amt::nn {

namespace {

template <typename S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using EMap = Eigen::Map<EMat<S>>;
template <typename S>
using ECMap = Eigen::Map<const EMat<S>>;

template <typename S>
bool any_grad(std::initializer_list<Var<S>> vs) {
  for (const Var<S>& v : vs)
    if (v.graph->needs_grad(v.id)) return true;
  return false;
}

template <typename S>
void require(bool cond, const char* msg) {
  if (!cond) throw NumericError(msg);
}

int64_t rows_of(const Shape& s) {
  int64_t n = 1;
  for (size_t i = 0; i + 1 < s.size(); ++i) n *= s[i];
  return n;
}

}  // namespace

template <typename S>
void gemm(bool a_t, bool b_t, int64_t m, int64_t n, int64_t k, S alpha, const S* a, const S* b,
          S beta, S* c) {
  EMap<S> cm(c, m, n);
  ECMap<S> am(a, a_t ? k : m, a_t ? m : k);
  ECMap<S> bm(b, b_t ? n : k, b_t ? k : n);
  if (beta == S(0)) {
    if (!a_t && !b_t)
      cm.noalias() = alpha * (am * bm);
    else if (a_t && !b_t)
      cm.noalias() = alpha * (am.transpose() * bm);
    else if (!a_t && b_t)
      cm.noalias() = alpha * (am * bm.transpose());
    else
      cm.noalias() = alpha * (am.transpose() * bm.transpose());
  } else {
    cm *= beta;
    if (!a_t && !b_t)
      cm.noalias() += alpha * (am * bm);
    else if (a_t && !b_t)
      cm.noalias() += alpha * (am.transpose() * bm);
    else if (!a_t && b_t)
      cm.noalias() += alpha * (am * bm.transpose());
    else
      cm.noalias() += alpha * (am.transpose() * bm.transpose());
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  Graph<S>& g = *a.graph;
  require<S>(a.value().same_shape(b.value()), "add: shape mismatch");
  Tensor<S> out = a.value();
  const S* pb = b.value().data();
  S* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) po[i] += pb[i];
  check_finite(out, "add");
  bool ng = any_grad<S>({a, b});
  int ia = a.id, ib = b.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ia, ib](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    gg.accum(ia, go);
    gg.accum(ib, go);
  });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  return add(a, scale(b, -1.0));
}

template <typename S>
Var<S> mul(Var<S> a, Var<S> b) {
  Graph<S>& g = *a.graph;
  require<S>(a.value().same_shape(b.value()), "mul: shape mismatch");
  Tensor<S> out(a.value().shape());
  const S* pa = a.value().data();
  const S* pb = b.value().data();
  S* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) po[i] = pa[i] * pb[i];
  check_finite(out, "mul");
  bool ng = any_grad<S>({a, b});
  int ia = a.id, ib = b.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ia, ib](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    if (gg.needs_grad(ia)) {
      Tensor<S>& da = gg.grad(ia);
      const S* vb = gg.value(ib).data();
      for (int64_t i = 0; i < da.size(); ++i) da[i] += go[i] * vb[i];
    }
    if (gg.needs_grad(ib)) {
      Tensor<S>& db = gg.grad(ib);
      const S* va = gg.value(ia).data();
      for (int64_t i = 0; i < db.size(); ++i) db[i] += go[i] * va[i];
    }
  });
}

template <typename S>
Var<S> scale(Var<S> a, double c) {
  Graph<S>& g = *a.graph;
  Tensor<S> out = a.value();
  S* po = out.data();
  const S cs = static_cast<S>(c);
  for (int64_t i = 0; i < out.size(); ++i) po[i] *= cs;
  check_finite(out, "scale");
  bool ng = g.needs_grad(a.id);
  int ia = a.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ia, cs](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    Tensor<S>& da = gg.grad(ia);
    for (int64_t i = 0; i < da.size(); ++i) da[i] += go[i] * cs;
  });
}

template <typename S>
Var<S> add_broadcast(Var<S> x, Var<S> b) {
  Graph<S>& g = *x.graph;
  const int64_t nb = b.value().size();
  require<S>(nb > 0 && x.value().size() % nb == 0, "add_broadcast: size mismatch");
  // b's shape must be a suffix of x's shape
  {
    const Shape& xs = x.shape();
    const Shape& bs = b.shape();
    require<S>(bs.size() <= xs.size(), "add_broadcast: rank mismatch");
    for (size_t i = 0; i < bs.size(); ++i)
      require<S>(bs[bs.size() - 1 - i] == xs[xs.size() - 1 - i], "add_broadcast: shape mismatch");
  }
  Tensor<S> out = x.value();
  const S* pb = b.value().data();
  S* po = out.data();
  const int64_t reps = out.size() / nb;
  for (int64_t r = 0; r < reps; ++r)
    for (int64_t i = 0; i < nb; ++i) po[r * nb + i] += pb[i];
  check_finite(out, "add_broadcast");
  bool ng = any_grad<S>({x, b});
  int ix = x.id, ib = b.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, ib, nb, reps](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    gg.accum(ix, go);
    if (gg.needs_grad(ib)) {
      Tensor<S>& db = gg.grad(ib);
      for (int64_t r = 0; r < reps; ++r)
        for (int64_t i = 0; i < nb; ++i) db[i] += go[r * nb + i];
    }
  });
}

// ---------------------------------------------------------------------------
// matrix products
// ---------------------------------------------------------------------------

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  Graph<S>& g = *a.graph;
  require<S>(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0), "matmul: bad shapes");
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<S> out({m, n});
  gemm<S>(false, false, m, n, k, S(1), a.value().data(), b.value().data(), S(0), out.data());
  check_finite(out, "matmul");
  bool ng = any_grad<S>({a, b});
  int ia = a.id, ib = b.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ia, ib, m, n, k](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    if (gg.needs_grad(ia))
      gemm<S>(false, true, m, k, n, S(1), go.data(), gg.value(ib).data(), S(1), gg.grad(ia).data());
    if (gg.needs_grad(ib))
      gemm<S>(true, false, k, n, m, S(1), gg.value(ia).data(), go.data(), S(1), gg.grad(ib).data());
  });
}

template <typename S>
Var<S> linear(Var<S> x, Var<S> w) {
  Graph<S>& g = *x.graph;
  require<S>(w.rank() == 2, "linear: weight must be 2-D");
  const Shape& xs = x.shape();
  require<S>(!xs.empty() && xs.back() == w.dim(0), "linear: inner dim mismatch");
  const int64_t in = w.dim(0), out_dim = w.dim(1);
  const int64_t m = x.value().size() / in;
  Shape os = xs;
  os.back() = out_dim;
  Tensor<S> out(os);
  gemm<S>(false, false, m, out_dim, in, S(1), x.value().data(), w.value().data(), S(0), out.data());
  check_finite(out, "linear");
  bool ng = any_grad<S>({x, w});
  int ix = x.id, iw = w.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, iw, m, in, out_dim](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    if (gg.needs_grad(ix))
      gemm<S>(false, true, m, in, out_dim, S(1), go.data(), gg.value(iw).data(), S(1),
              gg.grad(ix).data());
    if (gg.needs_grad(iw))
      gemm<S>(true, false, in, out_dim, m, S(1), gg.value(ix).data(), go.data(), S(1),
              gg.grad(iw).data());
  });
}

template <typename S>
Var<S> bmm(Var<S> a, Var<S> b) {
  Graph<S>& g = *a.graph;
  require<S>(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0) && a.dim(2) == b.dim(1),
             "bmm: bad shapes");
  const int64_t bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  Tensor<S> out({bs, m, n});
  {
    const S* pa = a.value().data();
    const S* pb = b.value().data();
    S* po = out.data();
    parallel_for(bs, [&](int64_t lo, int64_t hi) {
      for (int64_t i = lo; i < hi; ++i)
        gemm<S>(false, false, m, n, k, S(1), pa + i * m * k, pb + i * k * n, S(0), po + i * m * n);
    });
  }
  check_finite(out, "bmm");
  bool ng = any_grad<S>({a, b});
  int ia = a.id, ib = b.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ia, ib, bs, m, n, k](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    if (gg.needs_grad(ia)) {
      Tensor<S>& da = gg.grad(ia);
      const S* pb = gg.value(ib).data();
      for (int64_t i = 0; i < bs; ++i)
        gemm<S>(false, true, m, k, n, S(1), go.data() + i * m * n, pb + i * k * n, S(1),
                da.data() + i * m * k);
    }
    if (gg.needs_grad(ib)) {
      Tensor<S>& db = gg.grad(ib);
      const S* pa = gg.value(ia).data();
      for (int64_t i = 0; i < bs; ++i)
        gemm<S>(true, false, k, n, m, S(1), pa + i * m * k, go.data() + i * m * n, S(1),
                db.data() + i * k * n);
    }
  });
}

template <typename S>
Var<S> bmm_nt(Var<S> a, Var<S> b) {
  Graph<S>& g = *a.graph;
  require<S>(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2),
             "bmm_nt: bad shapes");
  const int64_t bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(1);
  Tensor<S> out({bs, m, n});
  {
    const S* pa = a.value().data();
    const S* pb = b.value().data();
    S* po = out.data();
    parallel_for(bs, [&](int64_t lo, int64_t hi) {
      for (int64_t i = lo; i < hi; ++i)
        gemm<S>(false, true, m, n, k, S(1), pa + i * m * k, pb + i * n * k, S(0), po + i * m * n);
    });
  }
  check_finite(out, "bmm_nt");
  bool ng = any_grad<S>({a, b});
  int ia = a.id, ib = b.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ia, ib, bs, m, n, k](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    if (gg.needs_grad(ia)) {
      Tensor<S>& da = gg.grad(ia);
      const S* pb = gg.value(ib).data();
      for (int64_t i = 0; i < bs; ++i)
        gemm<S>(false, false, m, k, n, S(1), go.data() + i * m * n, pb + i * n * k, S(1),
                da.data() + i * m * k);
    }
    if (gg.needs_grad(ib)) {
      Tensor<S>& db = gg.grad(ib);
      const S* pa = gg.value(ia).data();
      for (int64_t i = 0; i < bs; ++i)
        gemm<S>(true, false, n, k, m, S(1), go.data() + i * m * n, pa + i * m * k, S(1),
                db.data() + i * n * k);
    }
  });
}

// ---------------------------------------------------------------------------
// layout
// ---------------------------------------------------------------------------

template <typename S>
Var<S> transpose(Var<S> x) {
  Graph<S>& g = *x.graph;
  require<S>(x.rank() == 2, "transpose: 2-D only");
  const int64_t m = x.dim(0), n = x.dim(1);
  Tensor<S> out({n, m});
  const S* px = x.value().data();
  S* po = out.data();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) po[j * m + i] = px[i * n + j];
  bool ng = g.needs_grad(x.id);
  int ix = x.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, m, n](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    Tensor<S>& dx = gg.grad(ix);
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) dx[i * n + j] += go[j * m + i];
  });
}

template <typename S>
Var<S> permute3(Var<S> x, int a0, int a1, int a2) {
  Graph<S>& g = *x.graph;
  require<S>(x.rank() == 3, "permute3: 3-D only");
  const int perm[3] = {a0, a1, a2};
  const int64_t id0 = x.dim(0), id1 = x.dim(1), id2 = x.dim(2);
  const int64_t idims[3] = {id0, id1, id2};
  Tensor<S> out({idims[a0], idims[a1], idims[a2]});
  const S* px = x.value().data();
  S* po = out.data();
  const int64_t od1 = out.dim(1), od2 = out.dim(2);
  int64_t istr[3] = {id1 * id2, id2, 1};
  // output index (i,j,k) maps to input coordinate with axis perm[.]
  for (int64_t i = 0; i < out.dim(0); ++i)
    for (int64_t j = 0; j < od1; ++j) {
      const int64_t base = i * istr[perm[0]] + j * istr[perm[1]];
      const int64_t step = istr[perm[2]];
      S* row = po + (i * od1 + j) * od2;
      for (int64_t k = 0; k < od2; ++k) row[k] = px[base + k * step];
    }
  bool ng = g.needs_grad(x.id);
  int ix = x.id;
  int inv[3];
  inv[a0] = 0;
  inv[a1] = 1;
  inv[a2] = 2;
  const int q0 = inv[0], q1 = inv[1], q2 = inv[2];
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, q0, q1, q2](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    Tensor<S>& dx = gg.grad(ix);
    const int64_t d1 = dx.dim(1), d2 = dx.dim(2);
    const int64_t gdims[3] = {go.dim(0), go.dim(1), go.dim(2)};
    int64_t gstr[3] = {gdims[1] * gdims[2], gdims[2], 1};
    const int perm[3] = {q0, q1, q2};
    const S* pg = go.data();
    for (int64_t i = 0; i < dx.dim(0); ++i)
      for (int64_t j = 0; j < d1; ++j) {
        const int64_t base = i * gstr[perm[0]] + j * gstr[perm[1]];
        const int64_t step = gstr[perm[2]];
        S* row = dx.data() + (i * d1 + j) * d2;
        for (int64_t k = 0; k < d2; ++k) row[k] += pg[base + k * step];
      }
  });
}

template <typename S>
Var<S> reshape(Var<S> x, Shape shape) {
  Graph<S>& g = *x.graph;
  require<S>(shape_size(shape) == x.value().size(), "reshape: size mismatch");
  Tensor<S> out(shape, x.value().vec());
  bool ng = g.needs_grad(x.id);
  int ix = x.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    Tensor<S>& dx = gg.grad(ix);
    for (int64_t i = 0; i < dx.size(); ++i) dx[i] += go[i];
  });
}

template <typename S>
Var<S> split_heads(Var<S> x, int heads) {
  Graph<S>& g = *x.graph;
  require<S>(x.rank() == 3 && x.dim(2) % heads == 0, "split_heads: bad shape");
  const int64_t b = x.dim(0), t = x.dim(1), d = x.dim(2), hd = d / heads;
  Tensor<S> out({b * heads, t, hd});
  const S* px = x.value().data();
  S* po = out.data();
  for (int64_t i = 0; i < b; ++i)
    for (int64_t h = 0; h < heads; ++h)
      for (int64_t j = 0; j < t; ++j) {
        const S* src = px + (i * t + j) * d + h * hd;
        S* dst = po + ((i * heads + h) * t + j) * hd;
        std::copy(src, src + hd, dst);
      }
  bool ng = g.needs_grad(x.id);
  int ix = x.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, b, t, d, hd, heads](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    Tensor<S>& dx = gg.grad(ix);
    for (int64_t i = 0; i < b; ++i)
      for (int64_t h = 0; h < heads; ++h)
        for (int64_t j = 0; j < t; ++j) {
          const S* src = go.data() + ((i * heads + h) * t + j) * hd;
          S* dst = dx.data() + (i * t + j) * d + h * hd;
          for (int64_t k = 0; k < hd; ++k) dst[k] += src[k];
        }
  });
}

template <typename S>
Var<S> merge_heads(Var<S> x, int heads) {
  Graph<S>& g = *x.graph;
  require<S>(x.rank() == 3 && x.dim(0) % heads == 0, "merge_heads: bad shape");
  const int64_t b = x.dim(0) / heads, t = x.dim(1), hd = x.dim(2), d = hd * heads;
  Tensor<S> out({b, t, d});
  const S* px = x.value().data();
  S* po = out.data();
  for (int64_t i = 0; i < b; ++i)
    for (int64_t h = 0; h < heads; ++h)
      for (int64_t j = 0; j < t; ++j) {
        const S* src = px + ((i * heads + h) * t + j) * hd;
        S* dst = po + (i * t + j) * d + h * hd;
        std::copy(src, src + hd, dst);
      }
  bool ng = g.needs_grad(x.id);
  int ix = x.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, b, t, d, hd, heads](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    Tensor<S>& dx = gg.grad(ix);
    for (int64_t i = 0; i < b; ++i)
      for (int64_t h = 0; h < heads; ++h)
        for (int64_t j = 0; j < t; ++j) {
          const S* src = go.data() + (i * t + j) * d + h * hd;
          S* dst = dx.data() + ((i * heads + h) * t + j) * hd;
          for (int64_t k = 0; k < hd; ++k) dst[k] += src[k];
        }
  });
}

template <typename S>
Var<S> concat_last(Var<S> a, Var<S> b) {
  Graph<S>& g = *a.graph;
  require<S>(a.rank() == b.rank(), "concat_last: rank mismatch");
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  for (size_t i = 0; i + 1 < as.size(); ++i)
    require<S>(as[i] == bs[i], "concat_last: leading dims differ");
  const int64_t rows = rows_of(as), da = as.back(), db = bs.back();
  Shape os = as;
  os.back() = da + db;
  Tensor<S> out(os);
  const S* pa = a.value().data();
  const S* pb = b.value().data();
  S* po = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    std::copy(pa + r * da, pa + (r + 1) * da, po + r * (da + db));
    std::copy(pb + r * db, pb + (r + 1) * db, po + r * (da + db) + da);
  }
  bool ng = any_grad<S>({a, b});
  int ia = a.id, ib = b.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ia, ib, rows, da, db](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    if (gg.needs_grad(ia)) {
      Tensor<S>& dx = gg.grad(ia);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t i = 0; i < da; ++i) dx[r * da + i] += go[r * (da + db) + i];
    }
    if (gg.needs_grad(ib)) {
      Tensor<S>& dx = gg.grad(ib);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t i = 0; i < db; ++i) dx[r * db + i] += go[r * (da + db) + da + i];
    }
  });
}

template <typename S>
Var<S> slice(Var<S> x, int axis, int64_t start, int64_t len) {
  Graph<S>& g = *x.graph;
  const Shape& xs = x.shape();
  require<S>(axis >= 0 && axis < x.rank(), "slice: bad axis");
  require<S>(start >= 0 && len > 0 && start + len <= xs[static_cast<size_t>(axis)],
             "slice: out of range");
  // view x as (outer, dim, inner)
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= xs[static_cast<size_t>(i)];
  for (int i = axis + 1; i < x.rank(); ++i) inner *= xs[static_cast<size_t>(i)];
  const int64_t dim = xs[static_cast<size_t>(axis)];
  Shape os = xs;
  os[static_cast<size_t>(axis)] = len;
  Tensor<S> out(os);
  const S* px = x.value().data();
  S* po = out.data();
  for (int64_t o = 0; o < outer; ++o)
    std::copy(px + (o * dim + start) * inner, px + (o * dim + start + len) * inner,
              po + o * len * inner);
  bool ng = g.needs_grad(x.id);
  int ix = x.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, outer, inner, dim, start, len](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    Tensor<S>& dx = gg.grad(ix);
    for (int64_t o = 0; o < outer; ++o) {
      const S* src = go.data() + o * len * inner;
      S* dst = dx.data() + (o * dim + start) * inner;
      for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
    }
  });
}

template <typename S>
Var<S> pick_latents(Var<S> x, int start, int stride) {
  Graph<S>& g = *x.graph;
  require<S>(x.rank() == 3, "pick_latents: 3-D only");
  const int64_t t = x.dim(0), k = x.dim(1), d = x.dim(2);
  require<S>(start >= 0 && start < stride && k % stride == 0, "pick_latents: bad layout");
  const int64_t rows = k / stride;
  Tensor<S> out({rows, t, d});
  const S* px = x.value().data();
  S* po = out.data();
  for (int64_t j = 0; j < rows; ++j)
    for (int64_t i = 0; i < t; ++i) {
      const S* src = px + (i * k + start + j * stride) * d;
      std::copy(src, src + d, po + (j * t + i) * d);
    }
  bool ng = g.needs_grad(x.id);
  int ix = x.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, t, k, d, rows, start, stride](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    Tensor<S>& dx = gg.grad(ix);
    for (int64_t j = 0; j < rows; ++j)
      for (int64_t i = 0; i < t; ++i) {
        const S* src = go.data() + (j * t + i) * d;
        S* dst = dx.data() + (i * k + start + j * stride) * d;
        for (int64_t c = 0; c < d; ++c) dst[c] += src[c];
      }
  });
}

// ---------------------------------------------------------------------------
// nonlinearities and normalization
// ---------------------------------------------------------------------------

namespace {

template <typename S, typename F, typename DF>
Var<S> unary_op(Var<S> x, const char* name, F fwd, DF dval) {
  Graph<S>& g = *x.graph;
  Tensor<S> out(x.shape());
  const S* px = x.value().data();
  S* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) po[i] = fwd(px[i]);
  check_finite(out, name);
  bool ng = g.needs_grad(x.id);
  int ix = x.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, dval](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    const Tensor<S>& y = gg.value(self);
    const Tensor<S>& xv = gg.value(ix);
    Tensor<S>& dx = gg.grad(ix);
    for (int64_t i = 0; i < dx.size(); ++i) dx[i] += go[i] * dval(xv[i], y[i]);
  });
}

}  // namespace

template <typename S>
Var<S> relu(Var<S> x) {
  return unary_op(
      x, "relu", [](S v) { return v > S(0) ? v : S(0); },
      [](S v, S) { return v > S(0) ? S(1) : S(0); });
}

template <typename S>
Var<S> sigmoid(Var<S> x) {
  return unary_op(
      x, "sigmoid",
      [](S v) { return S(1) / (S(1) + std::exp(-v)); },
      [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
Var<S> tanh_op(Var<S> x) {
  return unary_op(
      x, "tanh", [](S v) { return std::tanh(v); }, [](S, S y) { return S(1) - y * y; });
}

template <typename S>
Var<S> softmax_last(Var<S> x) {
  Graph<S>& g = *x.graph;
  const int64_t d = x.shape().back();
  const int64_t rows = x.value().size() / d;
  Tensor<S> out(x.shape());
  const S* px = x.value().data();
  S* po = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const S* xr = px + r * d;
    S* yr = po + r * d;
    S mx = xr[0];
    for (int64_t i = 1; i < d; ++i) mx = std::max(mx, xr[i]);
    S sum = S(0);
    for (int64_t i = 0; i < d; ++i) {
      yr[i] = std::exp(xr[i] - mx);
      sum += yr[i];
    }
    const S inv = S(1) / sum;
    for (int64_t i = 0; i < d; ++i) yr[i] *= inv;
  }
  check_finite(out, "softmax");
  bool ng = g.needs_grad(x.id);
  int ix = x.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, rows, d](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    const Tensor<S>& y = gg.value(self);
    Tensor<S>& dx = gg.grad(ix);
    for (int64_t r = 0; r < rows; ++r) {
      const S* yr = y.data() + r * d;
      const S* gr = go.data() + r * d;
      S dot = S(0);
      for (int64_t i = 0; i < d; ++i) dot += gr[i] * yr[i];
      S* dr = dx.data() + r * d;
      for (int64_t i = 0; i < d; ++i) dr[i] += (gr[i] - dot) * yr[i];
    }
  });
}

template <typename S>
Var<S> layer_norm(Var<S> x, Var<S> gamma, Var<S> beta, double eps) {
  Graph<S>& g = *x.graph;
  const int64_t d = x.shape().back();
  require<S>(gamma.value().size() == d && beta.value().size() == d, "layer_norm: affine shape");
  const int64_t rows = x.value().size() / d;
  Tensor<S> out(x.shape());
  auto istds = std::make_shared<std::vector<S>>(static_cast<size_t>(rows));
  auto means = std::make_shared<std::vector<S>>(static_cast<size_t>(rows));
  const S* px = x.value().data();
  const S* pg = gamma.value().data();
  const S* pb = beta.value().data();
  S* po = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const S* xr = px + r * d;
    S mean = S(0);
    for (int64_t i = 0; i < d; ++i) mean += xr[i];
    mean /= static_cast<S>(d);
    S var = S(0);
    for (int64_t i = 0; i < d; ++i) {
      const S c = xr[i] - mean;
      var += c * c;
    }
    var /= static_cast<S>(d);
    const S istd = S(1) / std::sqrt(var + static_cast<S>(eps));
    (*means)[static_cast<size_t>(r)] = mean;
    (*istds)[static_cast<size_t>(r)] = istd;
    S* yr = po + r * d;
    for (int64_t i = 0; i < d; ++i) yr[i] = (xr[i] - mean) * istd * pg[i] + pb[i];
  }
  check_finite(out, "layer_norm");
  bool ng = any_grad<S>({x, gamma, beta});
  int ix = x.id, ig = gamma.id, ib = beta.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, ig, ib, rows, d, istds, means](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    const Tensor<S>& xv = gg.value(ix);
    const S* pg = gg.value(ig).data();
    const bool wx = gg.needs_grad(ix), wg = gg.needs_grad(ig), wb = gg.needs_grad(ib);
    Tensor<S>* dx = wx ? &gg.grad(ix) : nullptr;
    Tensor<S>* dg = wg ? &gg.grad(ig) : nullptr;
    Tensor<S>* db = wb ? &gg.grad(ib) : nullptr;
    for (int64_t r = 0; r < rows; ++r) {
      const S* xr = xv.data() + r * d;
      const S* gr = go.data() + r * d;
      const S mean = (*means)[static_cast<size_t>(r)];
      const S istd = (*istds)[static_cast<size_t>(r)];
      S sum_dyg = S(0), sum_dyg_xhat = S(0);
      for (int64_t i = 0; i < d; ++i) {
        const S xhat = (xr[i] - mean) * istd;
        const S dyg = gr[i] * pg[i];
        sum_dyg += dyg;
        sum_dyg_xhat += dyg * xhat;
        if (wg) (*dg)[i] += gr[i] * xhat;
        if (wb) (*db)[i] += gr[i];
      }
      if (wx) {
        const S inv_d = S(1) / static_cast<S>(d);
        S* dr = dx->data() + r * d;
        for (int64_t i = 0; i < d; ++i) {
          const S xhat = (xr[i] - mean) * istd;
          const S dyg = gr[i] * pg[i];
          dr[i] += istd * (dyg - sum_dyg * inv_d - xhat * sum_dyg_xhat * inv_d);
        }
      }
    }
  });
}

template <typename S>
Var<S> instance_norm(Var<S> x, Var<S> gamma, Var<S> beta, double eps) {
  Graph<S>& g = *x.graph;
  require<S>(x.rank() >= 2, "instance_norm: rank must be >= 2");
  const int64_t c = x.dim(0);
  const int64_t n = x.value().size() / c;
  require<S>(gamma.value().size() == c && beta.value().size() == c, "instance_norm: affine shape");
  Tensor<S> out(x.shape());
  auto istds = std::make_shared<std::vector<S>>(static_cast<size_t>(c));
  auto means = std::make_shared<std::vector<S>>(static_cast<size_t>(c));
  const S* px = x.value().data();
  const S* pg = gamma.value().data();
  const S* pb = beta.value().data();
  S* po = out.data();
  for (int64_t r = 0; r < c; ++r) {
    const S* xr = px + r * n;
    S mean = S(0);
    for (int64_t i = 0; i < n; ++i) mean += xr[i];
    mean /= static_cast<S>(n);
    S var = S(0);
    for (int64_t i = 0; i < n; ++i) {
      const S d = xr[i] - mean;
      var += d * d;
    }
    var /= static_cast<S>(n);
    const S istd = S(1) / std::sqrt(var + static_cast<S>(eps));
    (*means)[static_cast<size_t>(r)] = mean;
    (*istds)[static_cast<size_t>(r)] = istd;
    S* yr = po + r * n;
    for (int64_t i = 0; i < n; ++i) yr[i] = (xr[i] - mean) * istd * pg[r] + pb[r];
  }
  check_finite(out, "instance_norm");
  bool ng = any_grad<S>({x, gamma, beta});
  int ix = x.id, ig = gamma.id, ib = beta.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, ig, ib, c, n, istds, means](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    const Tensor<S>& xv = gg.value(ix);
    const S* pg = gg.value(ig).data();
    const bool wx = gg.needs_grad(ix), wg = gg.needs_grad(ig), wb = gg.needs_grad(ib);
    Tensor<S>* dx = wx ? &gg.grad(ix) : nullptr;
    Tensor<S>* dg = wg ? &gg.grad(ig) : nullptr;
    Tensor<S>* db = wb ? &gg.grad(ib) : nullptr;
    for (int64_t r = 0; r < c; ++r) {
      const S* xr = xv.data() + r * n;
      const S* gr = go.data() + r * n;
      const S mean = (*means)[static_cast<size_t>(r)];
      const S istd = (*istds)[static_cast<size_t>(r)];
      S sum_dy = S(0), sum_dy_xhat = S(0), sum_dy_raw = S(0);
      for (int64_t i = 0; i < n; ++i) {
        const S xhat = (xr[i] - mean) * istd;
        sum_dy += gr[i] * pg[r];
        sum_dy_xhat += gr[i] * pg[r] * xhat;
        sum_dy_raw += gr[i];
        if (wg) (*dg)[r] += gr[i] * xhat;
      }
      if (wb) (*db)[r] += sum_dy_raw;
      if (wx) {
        const S inv_n = S(1) / static_cast<S>(n);
        S* dr = dx->data() + r * n;
        for (int64_t i = 0; i < n; ++i) {
          const S xhat = (xr[i] - mean) * istd;
          dr[i] += istd * (gr[i] * pg[r] - sum_dy * inv_n - xhat * sum_dy_xhat * inv_n);
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// reductions and loss
// ---------------------------------------------------------------------------

template <typename S>
Var<S> mean_all(Var<S> x) {
  Graph<S>& g = *x.graph;
  const int64_t n = x.value().size();
  S acc = S(0);
  const S* px = x.value().data();
  for (int64_t i = 0; i < n; ++i) acc += px[i];
  acc /= static_cast<S>(n);
  bool ng = g.needs_grad(x.id);
  int ix = x.id;
  return g.make(Tensor<S>::scalar(acc), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, n](Graph<S>& gg, int self) {
    const S go = gg.grad(self)[0] / static_cast<S>(n);
    Tensor<S>& dx = gg.grad(ix);
    for (int64_t i = 0; i < n; ++i) dx[i] += go;
  });
}

template <typename S>
Var<S> sum_all(Var<S> x) {
  Graph<S>& g = *x.graph;
  const int64_t n = x.value().size();
  S acc = S(0);
  const S* px = x.value().data();
  for (int64_t i = 0; i < n; ++i) acc += px[i];
  bool ng = g.needs_grad(x.id);
  int ix = x.id;
  return g.make(Tensor<S>::scalar(acc), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, n](Graph<S>& gg, int self) {
    const S go = gg.grad(self)[0];
    Tensor<S>& dx = gg.grad(ix);
    for (int64_t i = 0; i < n; ++i) dx[i] += go;
  });
}

template <typename S>
Var<S> bce_mean(Var<S> pred, const Tensor<S>& target) {
  Graph<S>& g = *pred.graph;
  require<S>(pred.value().same_shape(target), "bce_mean: shape mismatch");
  const int64_t n = pred.value().size();
  const S lo = static_cast<S>(1e-7), hi = S(1) - static_cast<S>(1e-7);
  const S* pp = pred.value().data();
  const S* pt = target.data();
  S acc = S(0);
  for (int64_t i = 0; i < n; ++i) {
    const S p = pp[i];
    if (p < S(0) || p > S(1)) throw NumericError("bce_mean: probability outside [0,1]");
    const S pc = std::clamp(p, lo, hi);
    acc -= pt[i] * std::log(pc) + (S(1) - pt[i]) * std::log(S(1) - pc);
  }
  acc /= static_cast<S>(n);
  bool ng = g.needs_grad(pred.id);
  int ip = pred.id;
  auto tgt = std::make_shared<Tensor<S>>(target);
  return g.make(Tensor<S>::scalar(acc), ng, !ng ? typename Graph<S>::BackwardFn{} : [ip, n, lo, hi, tgt](Graph<S>& gg, int self) {
    const S go = gg.grad(self)[0] / static_cast<S>(n);
    const Tensor<S>& pv = gg.value(ip);
    Tensor<S>& dp = gg.grad(ip);
    const S* pt = tgt->data();
    for (int64_t i = 0; i < n; ++i) {
      const S p = pv[i];
      if (p <= lo || p >= hi) continue;
      dp[i] += go * (p - pt[i]) / (p * (S(1) - p));
    }
  });
}

template <typename S>
Var<S> dropout(Var<S> x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  Graph<S>& g = *x.graph;
  require<S>(rate < 1.0, "dropout: rate must be < 1");
  const int64_t n = x.value().size();
  const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
  auto mask = std::make_shared<Tensor<S>>(x.shape());
  Tensor<S> out(x.shape());
  const S* px = x.value().data();
  S* pm = mask->data();
  S* po = out.data();
  for (int64_t i = 0; i < n; ++i) {
    pm[i] = rng.bernoulli(rate) ? S(0) : keep_scale;
    po[i] = px[i] * pm[i];
  }
  bool ng = g.needs_grad(x.id);
  int ix = x.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, n, mask](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    Tensor<S>& dx = gg.grad(ix);
    const S* pm = mask->data();
    for (int64_t i = 0; i < n; ++i) dx[i] += go[i] * pm[i];
  });
}

template <typename S>
Var<S> stop_gradient(Var<S> x) {
  return x.graph->constant(x.value());
}

// ---------------------------------------------------------------------------
// convolution and pooling
// ---------------------------------------------------------------------------

namespace {

/// Gathers 3x3 zero-padded patches for output rows [t0, t1) into a
/// (cin*9) x ((t1-t0)*f) matrix.
template <typename S>
void im2col(const S* x, int64_t cin, int64_t t_len, int64_t f, int64_t t0, int64_t t1, S* patches) {
  const int64_t cols = (t1 - t0) * f;
  for (int64_t ci = 0; ci < cin; ++ci) {
    const S* xc = x + ci * t_len * f;
    for (int kt = -1; kt <= 1; ++kt)
      for (int kf = -1; kf <= 1; ++kf) {
        S* row = patches + (ci * 9 + (kt + 1) * 3 + (kf + 1)) * cols;
        for (int64_t t = t0; t < t1; ++t) {
          const int64_t ts = t + kt;
          S* dst = row + (t - t0) * f;
          if (ts < 0 || ts >= t_len) {
            std::fill(dst, dst + f, S(0));
            continue;
          }
          const S* src = xc + ts * f;
          for (int64_t ff = 0; ff < f; ++ff) {
            const int64_t fs = ff + kf;
            dst[ff] = (fs < 0 || fs >= f) ? S(0) : src[fs];
          }
        }
      }
  }
}

}  // namespace

template <typename S>
Var<S> conv2d_3x3(Var<S> x, Var<S> w, Var<S> b) {
  Graph<S>& g = *x.graph;
  require<S>(x.rank() == 3 && w.rank() == 2, "conv2d: bad shapes");
  const int64_t cin = x.dim(0), t_len = x.dim(1), f = x.dim(2);
  const int64_t cout = w.dim(0);
  require<S>(w.dim(1) == cin * 9 && b.value().size() == cout, "conv2d: weight shape mismatch");
  Tensor<S> out({cout, t_len, f});
  const S* px = x.value().data();
  const S* pw = w.value().data();
  const S* pb = b.value().data();
  S* po = out.data();
  const int64_t chunk = std::max<int64_t>(1, 8192 / std::max<int64_t>(f, 1));
  const int64_t n_chunks = (t_len + chunk - 1) / chunk;
  parallel_for(n_chunks, [&](int64_t lo, int64_t hi) {
    std::vector<S> patches(static_cast<size_t>(cin * 9 * chunk * f));
    std::vector<S> ybuf(static_cast<size_t>(cout * chunk * f));
    for (int64_t c = lo; c < hi; ++c) {
      const int64_t t0 = c * chunk, t1 = std::min(t0 + chunk, t_len);
      const int64_t cols = (t1 - t0) * f;
      im2col<S>(px, cin, t_len, f, t0, t1, patches.data());
      gemm<S>(false, false, cout, cols, cin * 9, S(1), pw, patches.data(), S(0), ybuf.data());
      for (int64_t co = 0; co < cout; ++co) {
        const S* src = ybuf.data() + co * cols;
        S* dst = po + (co * t_len + t0) * f;
        const S bias = pb[co];
        for (int64_t i = 0; i < cols; ++i) dst[i] = src[i] + bias;
      }
    }
  });
  check_finite(out, "conv2d");
  bool ng = any_grad<S>({x, w, b});
  int ix = x.id, iw = w.id, ib = b.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, iw, ib, cin, t_len, f, cout, chunk](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    const S* pgo = go.data();
    if (gg.needs_grad(ib)) {
      Tensor<S>& db = gg.grad(ib);
      for (int64_t co = 0; co < cout; ++co) {
        S acc = S(0);
        const S* src = pgo + co * t_len * f;
        for (int64_t i = 0; i < t_len * f; ++i) acc += src[i];
        db[co] += acc;
      }
    }
    const bool wx = gg.needs_grad(ix), ww = gg.needs_grad(iw);
    if (!wx && !ww) return;
    const S* px = gg.value(ix).data();
    const S* pw = gg.value(iw).data();
    Tensor<S>* dx = wx ? &gg.grad(ix) : nullptr;
    Tensor<S>* dw = ww ? &gg.grad(iw) : nullptr;
    std::vector<S> patches(static_cast<size_t>(cin * 9 * chunk * f));
    std::vector<S> gybuf(static_cast<size_t>(cout * chunk * f));
    std::vector<S> gpatches(static_cast<size_t>(cin * 9 * chunk * f));
    for (int64_t t0 = 0; t0 < t_len; t0 += chunk) {
      const int64_t t1 = std::min(t0 + chunk, t_len);
      const int64_t cols = (t1 - t0) * f;
      for (int64_t co = 0; co < cout; ++co)
        std::copy(pgo + (co * t_len + t0) * f, pgo + (co * t_len + t1) * f,
                  gybuf.data() + co * cols);
      if (ww) {
        im2col<S>(px, cin, t_len, f, t0, t1, patches.data());
        gemm<S>(false, true, cout, cin * 9, cols, S(1), gybuf.data(), patches.data(), S(1),
                dw->data());
      }
      if (wx) {
        gemm<S>(true, false, cin * 9, cols, cout, S(1), pw, gybuf.data(), S(0), gpatches.data());
        // scatter patch gradients back (col2im)
        for (int64_t ci = 0; ci < cin; ++ci) {
          S* xc = dx->data() + ci * t_len * f;
          for (int kt = -1; kt <= 1; ++kt)
            for (int kf = -1; kf <= 1; ++kf) {
              const S* row = gpatches.data() + (ci * 9 + (kt + 1) * 3 + (kf + 1)) * cols;
              for (int64_t t = t0; t < t1; ++t) {
                const int64_t ts = t + kt;
                if (ts < 0 || ts >= t_len) continue;
                const S* src = row + (t - t0) * f;
                S* dst = xc + ts * f;
                const int64_t f_lo = std::max<int64_t>(0, -kf);
                const int64_t f_hi = std::min<int64_t>(f, f - kf);
                for (int64_t ff = f_lo; ff < f_hi; ++ff) dst[ff + kf] += src[ff];
              }
            }
        }
      }
    }
  });
}

template <typename S>
Var<S> avgpool_freq2(Var<S> x) {
  Graph<S>& g = *x.graph;
  require<S>(x.rank() == 3 && x.dim(2) % 2 == 0, "avgpool_freq2: F must be even");
  const int64_t c = x.dim(0), t = x.dim(1), f = x.dim(2);
  Tensor<S> out({c, t, f / 2});
  const S* px = x.value().data();
  S* po = out.data();
  for (int64_t i = 0; i < c * t; ++i) {
    const S* src = px + i * f;
    S* dst = po + i * (f / 2);
    for (int64_t j = 0; j < f / 2; ++j) dst[j] = (src[2 * j] + src[2 * j + 1]) * S(0.5);
  }
  bool ng = g.needs_grad(x.id);
  int ix = x.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [ix, c, t, f](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    Tensor<S>& dx = gg.grad(ix);
    for (int64_t i = 0; i < c * t; ++i) {
      const S* src = go.data() + i * (f / 2);
      S* dst = dx.data() + i * f;
      for (int64_t j = 0; j < f / 2; ++j) {
        const S h = src[j] * S(0.5);
        dst[2 * j] += h;
        dst[2 * j + 1] += h;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// recurrent scan
// ---------------------------------------------------------------------------

namespace {

template <typename S>
struct GruSaved {
  // all (T, B, H), indexed by absolute time
  Tensor<S> r, z, n, ghn, hprev;
  Tensor<S> xt;  // (T, B, In) time-major input copy
};

}  // namespace

template <typename S>
Var<S> gru_scan(Var<S> x, Var<S> wx, Var<S> wh, Var<S> bx, Var<S> bh, bool reverse) {
  Graph<S>& g = *x.graph;
  require<S>(x.rank() == 3, "gru_scan: input must be (B,T,In)");
  const int64_t b = x.dim(0), t_len = x.dim(1), in = x.dim(2);
  require<S>(wx.rank() == 2 && wx.dim(1) == in && wx.dim(0) % 3 == 0, "gru_scan: wx shape");
  const int64_t h = wx.dim(0) / 3;
  require<S>(wh.dim(0) == 3 * h && wh.dim(1) == h, "gru_scan: wh shape");
  require<S>(bx.value().size() == 3 * h && bh.value().size() == 3 * h, "gru_scan: bias shape");

  bool ng = any_grad<S>({x, wx, wh, bx, bh});
  auto saved = std::make_shared<GruSaved<S>>();
  // time-major copy so each step reads a contiguous (B,In) block
  saved->xt = Tensor<S>({t_len, b, in});
  {
    const S* px = x.value().data();
    S* pxt = saved->xt.data();
    for (int64_t i = 0; i < b; ++i)
      for (int64_t j = 0; j < t_len; ++j)
        std::copy(px + (i * t_len + j) * in, px + (i * t_len + j + 1) * in,
                  pxt + (j * b + i) * in);
  }
  // input contribution for all steps in one product
  Tensor<S> gi({t_len * b, 3 * h});
  gemm<S>(false, true, t_len * b, 3 * h, in, S(1), saved->xt.data(), wx.value().data(), S(0),
          gi.data());
  {
    const S* pbx = bx.value().data();
    S* pgi = gi.data();
    for (int64_t r = 0; r < t_len * b; ++r)
      for (int64_t i = 0; i < 3 * h; ++i) pgi[r * 3 * h + i] += pbx[i];
  }
  if (ng) {
    saved->r = Tensor<S>({t_len, b, h});
    saved->z = Tensor<S>({t_len, b, h});
    saved->n = Tensor<S>({t_len, b, h});
    saved->ghn = Tensor<S>({t_len, b, h});
    saved->hprev = Tensor<S>({t_len, b, h});
  }

  Tensor<S> out({b, t_len, h});
  Tensor<S> hcur({b, h});
  Tensor<S> gh({b, 3 * h});
  const S* pwh = wh.value().data();
  const S* pbh = bh.value().data();
  for (int64_t s = 0; s < t_len; ++s) {
    const int64_t t = reverse ? t_len - 1 - s : s;
    gemm<S>(false, true, b, 3 * h, h, S(1), hcur.data(), pwh, S(0), gh.data());
    const S* pgi = gi.data() + t * b * 3 * h;
    for (int64_t i = 0; i < b; ++i) {
      const S* gir = pgi + i * 3 * h;
      const S* ghr = gh.data() + i * 3 * h;
      S* hrow = hcur.data() + i * h;
      S* orow = out.data() + (i * t_len + t) * h;
      for (int64_t j = 0; j < h; ++j) {
        const S rg = S(1) / (S(1) + std::exp(-(gir[j] + ghr[j] + pbh[j])));
        const S zg = S(1) / (S(1) + std::exp(-(gir[h + j] + ghr[h + j] + pbh[h + j])));
        const S ghn = ghr[2 * h + j] + pbh[2 * h + j];
        const S nn = std::tanh(gir[2 * h + j] + rg * ghn);
        if (ng) {
          saved->r.at(t, i, j) = rg;
          saved->z.at(t, i, j) = zg;
          saved->n.at(t, i, j) = nn;
          saved->ghn.at(t, i, j) = ghn;
          saved->hprev.at(t, i, j) = hrow[j];
        }
        hrow[j] = (S(1) - zg) * nn + zg * hrow[j];
        orow[j] = hrow[j];
      }
    }
  }
  check_finite(out, "gru_scan");

  int ixv = x.id, iwx = wx.id, iwh = wh.id, ibx = bx.id, ibh = bh.id;
  return g.make(std::move(out), ng, !ng ? typename Graph<S>::BackwardFn{} : [=](Graph<S>& gg, int self) {
    const Tensor<S>& go = gg.grad(self);
    const S* pwh = gg.value(iwh).data();
    Tensor<S> dgi({t_len, b, 3 * h});
    Tensor<S> dgh({b, 3 * h});
    Tensor<S> dh({b, h});
    Tensor<S>* dwh = gg.needs_grad(iwh) ? &gg.grad(iwh) : nullptr;
    Tensor<S>* dbh = gg.needs_grad(ibh) ? &gg.grad(ibh) : nullptr;
    for (int64_t s = t_len - 1; s >= 0; --s) {
      const int64_t t = reverse ? t_len - 1 - s : s;
      for (int64_t i = 0; i < b; ++i) {
        S* dhr = dh.data() + i * h;
        const S* gor = go.data() + (i * t_len + t) * h;
        S* dgir = dgi.data() + (t * b + i) * 3 * h;
        S* dghr = dgh.data() + i * 3 * h;
        for (int64_t j = 0; j < h; ++j) {
          const S dht = dhr[j] + gor[j];
          const S rg = saved->r.at(t, i, j);
          const S zg = saved->z.at(t, i, j);
          const S nn = saved->n.at(t, i, j);
          const S ghn = saved->ghn.at(t, i, j);
          const S hp = saved->hprev.at(t, i, j);
          const S dz = dht * (hp - nn) * zg * (S(1) - zg);
          const S dn = dht * (S(1) - zg) * (S(1) - nn * nn);
          const S dr = dn * ghn * rg * (S(1) - rg);
          dgir[j] = dr;
          dgir[h + j] = dz;
          dgir[2 * h + j] = dn;
          dghr[j] = dr;
          dghr[h + j] = dz;
          dghr[2 * h + j] = dn * rg;
          dhr[j] = dht * zg;  // carry, h-path via wh added below
        }
      }
      // dh_prev += dgh * wh ; weight/bias grads from this step
      gemm<S>(false, false, b, h, 3 * h, S(1), dgh.data(), pwh, S(1), dh.data());
      if (dwh) {
        // hprev rows for this step, gathered time-major
        gemm<S>(true, false, 3 * h, h, b, S(1), dgh.data(), saved->hprev.data() + t * b * h, S(1),
                dwh->data());
      }
      if (dbh) {
        S* pdbh = dbh->data();
        for (int64_t i = 0; i < b; ++i)
          for (int64_t j = 0; j < 3 * h; ++j) pdbh[j] += dgh[i * 3 * h + j];
      }
    }
    if (gg.needs_grad(ibx)) {
      Tensor<S>& dbx = gg.grad(ibx);
      for (int64_t r = 0; r < t_len * b; ++r)
        for (int64_t j = 0; j < 3 * h; ++j) dbx[j] += dgi[r * 3 * h + j];
    }
    if (gg.needs_grad(iwx))
      gemm<S>(true, false, 3 * h, in, t_len * b, S(1), dgi.data(), saved->xt.data(), S(1),
              gg.grad(iwx).data());
    if (gg.needs_grad(ixv)) {
      Tensor<S> dxt({t_len * b, in});
      gemm<S>(false, false, t_len * b, in, 3 * h, S(1), dgi.data(), gg.value(iwx).data(), S(0),
              dxt.data());
      Tensor<S>& dx = gg.grad(ixv);
      for (int64_t i = 0; i < b; ++i)
        for (int64_t j = 0; j < t_len; ++j) {
          const S* src = dxt.data() + (j * b + i) * in;
          S* dst = dx.data() + (i * t_len + j) * in;
          for (int64_t c = 0; c < in; ++c) dst[c] += src[c];
        }
    }
  });
}

// ---------------------------------------------------------------------------
// explicit instantiations
// ---------------------------------------------------------------------------

#define AMT_INSTANTIATE_OPS(S)                                                            \
  template void gemm<S>(bool, bool, int64_t, int64_t, int64_t, S, const S*, const S*, S, S*); \
  template Var<S> add(Var<S>, Var<S>);                                                   \
  template Var<S> sub(Var<S>, Var<S>);                                                   \
  template Var<S> mul(Var<S>, Var<S>);                                                   \
  template Var<S> scale(Var<S>, double);                                                 \
  template Var<S> add_broadcast(Var<S>, Var<S>);                                         \
  template Var<S> matmul(Var<S>, Var<S>);                                                \
  template Var<S> linear(Var<S>, Var<S>);                                                \
  template Var<S> bmm(Var<S>, Var<S>);                                                   \
  template Var<S> bmm_nt(Var<S>, Var<S>);                                                \
  template Var<S> transpose(Var<S>);                                                     \
  template Var<S> permute3(Var<S>, int, int, int);                                       \
  template Var<S> reshape(Var<S>, Shape);                                                \
  template Var<S> split_heads(Var<S>, int);                                              \
  template Var<S> merge_heads(Var<S>, int);                                              \
  template Var<S> concat_last(Var<S>, Var<S>);                                           \
  template Var<S> slice(Var<S>, int, int64_t, int64_t);                                  \
  template Var<S> pick_latents(Var<S>, int, int);                                        \
  template Var<S> relu(Var<S>);                                                          \
  template Var<S> sigmoid(Var<S>);                                                       \
  template Var<S> tanh_op(Var<S>);                                                       \
  template Var<S> softmax_last(Var<S>);                                                  \
  template Var<S> layer_norm(Var<S>, Var<S>, Var<S>, double);                            \
  template Var<S> instance_norm(Var<S>, Var<S>, Var<S>, double);                         \
  template Var<S> mean_all(Var<S>);                                                      \
  template Var<S> sum_all(Var<S>);                                                       \
  template Var<S> bce_mean(Var<S>, const Tensor<S>&);                                    \
  template Var<S> dropout(Var<S>, double, Rng&);                                         \
  template Var<S> stop_gradient(Var<S>);                                                 \
  template Var<S> conv2d_3x3(Var<S>, Var<S>, Var<S>);                                    \
  template Var<S> avgpool_freq2(Var<S>);                                                 \
  template Var<S> gru_scan(Var<S>, Var<S>, Var<S>, Var<S>, Var<S>, bool);

AMT_INSTANTIATE_OPS(float)
AMT_INSTANTIATE_OPS(double)

#undef AMT_INSTANTIATE_OPS

}  // namespace amt::nn
