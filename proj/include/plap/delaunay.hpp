#pragma once

// Incremental Bowyer-Watson Delaunay triangulation of a point set.

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "plap/error.hpp"
#include "plap/geometry.hpp"
#include "plap/predicates.hpp"

namespace plap {

namespace detail {

// Hilbert index of (x, y) on a 2^16 grid; gives a locality-preserving insertion order.
inline std::uint64_t hilbert_index(std::uint32_t x, std::uint32_t y) {
  std::uint64_t d = 0;
  for (std::uint32_t s = 1u << 15; s > 0; s >>= 1) {
    const std::uint32_t rx = (x & s) > 0;
    const std::uint32_t ry = (y & s) > 0;
    d += static_cast<std::uint64_t>(s) * s * ((3 * rx) ^ ry);
    if (ry == 0) {
      if (rx == 1) {
        x = s - 1 - x;
        y = s - 1 - y;
      }
      std::swap(x, y);
    }
  }
  return d;
}

class BowyerWatson {
 public:
  explicit BowyerWatson(std::span<const Point> pts) : pts_(pts.begin(), pts.end()) {
    const std::size_t n = pts_.size();
    if (n < 3) throw MeshError("delaunay: need at least 3 points");
    double xmin = pts_[0].x, xmax = xmin, ymin = pts_[0].y, ymax = ymin;
    for (const auto& p : pts_) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
    const double span = std::max(xmax - xmin, ymax - ymin);
    const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
    const double big = 1e4 * span;
    pts_.push_back({cx - big, cy - big});
    pts_.push_back({cx + big, cy - big});
    pts_.push_back({cx, cy + big});
    tris_.push_back({{static_cast<int>(n), static_cast<int>(n + 1), static_cast<int>(n + 2)}, {{-1, -1, -1}}, true});

    std::vector<std::pair<std::uint64_t, int>> order(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto qx = static_cast<std::uint32_t>((pts_[i].x - xmin) / (span > 0 ? span : 1.0) * 65535.0);
      const auto qy = static_cast<std::uint32_t>((pts_[i].y - ymin) / (span > 0 ? span : 1.0) * 65535.0);
      order[i] = {hilbert_index(qx, qy), static_cast<int>(i)};
    }
    std::sort(order.begin(), order.end());
    for (const auto& [key, idx] : order) insert(idx);
  }

  /// Triangles (counter-clockwise) not touching the bounding super-triangle.
  std::vector<std::array<int, 3>> triangles() const {
    const int n = static_cast<int>(pts_.size()) - 3;
    std::vector<std::array<int, 3>> out;
    for (const auto& t : tris_) {
      if (!t.alive) continue;
      if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
      out.push_back(t.v);
    }
    return out;
  }

 private:
  struct Tri {
    std::array<int, 3> v;
    std::array<int, 3> nb;  // neighbor across the edge opposite v[i]
    bool alive;
  };

  std::vector<Point> pts_;
  std::vector<Tri> tris_;
  std::vector<int> free_;
  int last_ = 0;

  int locate(Point p) {
    int t = last_;
    if (!tris_[t].alive) t = static_cast<int>(std::find_if(tris_.begin(), tris_.end(), [](const Tri& x) { return x.alive; }) - tris_.begin());
    for (std::size_t steps = 0; steps < 4 * tris_.size() + 16; ++steps) {
      const Tri& tr = tris_[t];
      int next = -1;
      for (int i = 0; i < 3; ++i) {
        const Point a = pts_[tr.v[(i + 1) % 3]];
        const Point b = pts_[tr.v[(i + 2) % 3]];
        if (predicates::orient(a, b, p) < 0) {
          next = tr.nb[i];
          break;
        }
      }
      if (next < 0) return t;
      t = next;
    }
    throw MeshError("delaunay: point location did not terminate");
  }

  bool in_circumcircle(int t, Point p) const {
    const Tri& tr = tris_[t];
    return predicates::incircle(pts_[tr.v[0]], pts_[tr.v[1]], pts_[tr.v[2]], p) > 0;
  }

  int new_tri(const std::array<int, 3>& v) {
    Tri t{v, {{-1, -1, -1}}, true};
    if (!free_.empty()) {
      const int id = free_.back();
      free_.pop_back();
      tris_[id] = t;
      return id;
    }
    tris_.push_back(t);
    return static_cast<int>(tris_.size()) - 1;
  }

  void insert(int pi) {
    const Point p = pts_[pi];
    const int start = locate(p);

    // Cavity: all triangles whose circumcircle strictly contains p, grown from the
    // containing triangle.
    std::vector<int> cavity{start};
    std::vector<int> stack{start};
    std::vector<char>& mark = mark_;
    if (mark.size() < tris_.size()) mark.resize(tris_.size() * 2, 0);
    mark[start] = 1;
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      for (int i = 0; i < 3; ++i) {
        const int nb = tris_[t].nb[i];
        if (nb < 0 || mark[nb]) continue;
        if (in_circumcircle(nb, p)) {
          mark[nb] = 1;
          cavity.push_back(nb);
          stack.push_back(nb);
        }
      }
    }

    // Boundary edges of the cavity, oriented counter-clockwise around p.
    struct Edge {
      int a, b, outside;
    };
    std::vector<Edge> boundary;
    for (const int t : cavity) {
      const Tri& tr = tris_[t];
      for (int i = 0; i < 3; ++i) {
        const int nb = tr.nb[i];
        if (nb >= 0 && mark[nb]) continue;
        boundary.push_back({tr.v[(i + 1) % 3], tr.v[(i + 2) % 3], nb});
      }
    }
    for (const int t : cavity) {
      mark[t] = 0;
      tris_[t].alive = false;
      free_.push_back(t);
    }

    std::vector<int> created;
    created.reserve(boundary.size());
    for (const auto& e : boundary) {
      const int id = new_tri({e.a, e.b, pi});
      if (mark.size() < tris_.size()) mark.resize(tris_.size() * 2, 0);
      tris_[id].nb[2] = e.outside;
      if (e.outside >= 0) {
        Tri& o = tris_[e.outside];
        for (int k = 0; k < 3; ++k) {
          if (o.v[(k + 1) % 3] == e.b && o.v[(k + 2) % 3] == e.a) o.nb[k] = id;
        }
      }
      created.push_back(id);
    }
    // Stitch the fan: new triangle (a, b, p) meets (b, c, p) across edge (b, p)
    // and (z, a, p) across edge (p, a).
    std::vector<std::pair<int, int>> by_first;
    by_first.reserve(created.size());
    for (const int id : created) by_first.emplace_back(tris_[id].v[0], id);
    std::sort(by_first.begin(), by_first.end());
    auto find_first = [&](int vertex) {
      auto it = std::lower_bound(by_first.begin(), by_first.end(), std::make_pair(vertex, -1));
      if (it == by_first.end() || it->first != vertex) throw MeshError("delaunay: cavity is not star-shaped");
      return it->second;
    };
    for (const int id : created) {
      const int b = tris_[id].v[1];
      const int nxt = find_first(b);
      tris_[id].nb[0] = nxt;  // edge (b, p) is opposite v[0] = a
      tris_[nxt].nb[1] = id;  // edge (p, b') with b' = v[0] of nxt is opposite its v[1]
    }
    last_ = created.front();
  }

  std::vector<char> mark_;
};

}  // namespace detail

/// Delaunay triangulation of pts; triangles are counter-clockwise index triples.
inline std::vector<std::array<int, 3>> delaunay(std::span<const Point> pts) {
  return detail::BowyerWatson(pts).triangles();
}

}  // namespace plap
