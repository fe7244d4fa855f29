#pragma once

// Brute-force reference implementations. Plain vectors only, no library
// types, written straight from the definitions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using Points = std::vector<std::vector<double>>;
using Labels = std::vector<int>;

inline double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double t = a[j] - b[j];
    s += t * t;
  }
  return s;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

// full sort of (distance, index), first k
inline std::vector<std::size_t> knn(const Points& refs, const std::vector<double>& q, std::size_t k,
                                    std::optional<std::size_t> exclude = std::nullopt) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (exclude && *exclude == i) continue;
    all.emplace_back(sqdist(refs[i], q), i);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(all[i].second);
  return out;
}

inline std::map<int, std::size_t> counts(const Labels& y) {
  std::map<int, std::size_t> c;
  for (int v : y) ++c[v];
  return c;
}

// restore every member of a class that lost all its samples
inline std::set<std::size_t> guard(const Labels& y, std::set<std::size_t> keep) {
  std::set<int> alive;
  for (std::size_t i : keep) alive.insert(y[i]);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!alive.count(y[i])) keep.insert(i);
  }
  return keep;
}

inline std::set<std::size_t> enn(const Points& x, const Labels& y, std::size_t k) {
  std::set<std::size_t> keep;
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::map<int, std::size_t> votes;
    for (std::size_t j : knn(x, x[i], k, i)) ++votes[y[j]];
    bool drop = false;
    for (const auto& [label, v] : votes) {
      if (v * 2 > k && label != y[i]) drop = true;
    }
    if (!drop) keep.insert(i);
  }
  return guard(y, keep);
}

inline std::vector<std::pair<std::size_t, std::size_t>> tomek_pairs(const Points& x, const Labels& y) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < x.size(); ++a) {
    for (std::size_t b = a + 1; b < x.size(); ++b) {
      if (y[a] == y[b]) continue;
      if (knn(x, x[a], 1, a)[0] == b && knn(x, x[b], 1, b)[0] == a) out.emplace_back(a, b);
    }
  }
  return out;
}

inline std::set<std::size_t> tomek(const Points& x, const Labels& y) {
  const auto n_of = counts(y);
  std::set<std::size_t> drop;
  for (const auto& [a, b] : tomek_pairs(x, y)) {
    const std::size_t na = n_of.at(y[a]);
    const std::size_t nb = n_of.at(y[b]);
    if (na >= nb) drop.insert(a);
    if (nb >= na) drop.insert(b);
  }
  std::set<std::size_t> keep;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!drop.count(i)) keep.insert(i);
  }
  return guard(y, keep);
}

inline std::set<std::size_t> random_under(const Labels& y, std::uint64_t seed) {
  const auto n_of = counts(y);
  std::size_t target = y.size();
  for (const auto& [c, n] : n_of) target = std::min(target, n);
  std::mt19937_64 rng(seed);
  std::set<std::size_t> keep;
  for (const auto& [c, n] : n_of) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == c) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    keep.insert(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(target));
  }
  return keep;
}

// minority = smallest class (lowest id on ties). For every other class in id
// order: seed member by uniform pick, scan the shuffled rest, add the ones
// the retained set misclassifies by 1-NN. Union, then Tomek links inside the
// union; minority never dropped, otherwise the global-count rule.
inline std::set<std::size_t> oss(const Points& x, const Labels& y, std::uint64_t seed) {
  const auto n_of = counts(y);
  int minority = n_of.begin()->first;
  for (const auto& [c, n] : n_of) {
    if (n < n_of.at(minority)) minority = c;
  }
  std::vector<std::size_t> minority_members;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == minority) minority_members.push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::set<std::size_t> retained(minority_members.begin(), minority_members.end());
  for (const auto& [c, n] : n_of) {
    if (c == minority) continue;
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == c) members.push_back(i);
    }
    const std::size_t pos = std::uniform_int_distribution<std::size_t>(0, members.size() - 1)(rng);
    std::vector<std::size_t> store = minority_members;
    store.push_back(members[pos]);
    members.erase(members.begin() + static_cast<std::ptrdiff_t>(pos));
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t m : members) {
      // 1-NN over the store, lowest index on ties
      std::vector<std::pair<double, std::size_t>> cand;
      for (std::size_t r : store) cand.emplace_back(sqdist(x[m], x[r]), r);
      const auto best = *std::min_element(cand.begin(), cand.end());
      if (y[best.second] != c) store.push_back(m);
    }
    retained.insert(store.begin(), store.end());
  }
  const std::vector<std::size_t> sub(retained.begin(), retained.end());
  Points sx;
  Labels sy;
  for (std::size_t i : sub) {
    sx.push_back(x[i]);
    sy.push_back(y[i]);
  }
  std::set<std::size_t> drop;
  for (const auto& [la, lb] : tomek_pairs(sx, sy)) {
    const std::size_t a = sub[la];
    const std::size_t b = sub[lb];
    if (y[a] == minority) {
      drop.insert(b);
    } else if (y[b] == minority) {
      drop.insert(a);
    } else {
      if (n_of.at(y[a]) >= n_of.at(y[b])) drop.insert(a);
      if (n_of.at(y[b]) >= n_of.at(y[a])) drop.insert(b);
    }
  }
  std::set<std::size_t> keep;
  for (std::size_t i : sub) {
    if (!drop.count(i)) keep.insert(i);
  }
  return guard(y, keep);
}

struct PairStats {
  std::size_t pairs = 0;
  double mean_euclid = 0.0;
  double mean_cosine = 0.0;
};

// all i<j pairs of the members of `label`, rows in index order
inline PairStats pairwise(const Points& x, const Labels& y, int label) {
  std::vector<std::size_t> m;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == label) m.push_back(i);
  }
  PairStats s;
  double de = 0.0, dc = 0.0;
  for (std::size_t a = 0; a < m.size(); ++a) {
    for (std::size_t b = a + 1; b < m.size(); ++b) {
      const auto& u = x[m[a]];
      const auto& v = x[m[b]];
      de += std::sqrt(sqdist(u, v));
      const double nu = std::sqrt(dot(u, u));
      const double nv = std::sqrt(dot(v, v));
      if (nu != 0.0 && nv != 0.0) dc += std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
      ++s.pairs;
    }
  }
  if (s.pairs) {
    s.mean_euclid = de / static_cast<double>(s.pairs);
    s.mean_cosine = dc / static_cast<double>(s.pairs);
  }
  return s;
}

// central difference of f around x[i]
template <typename F>
double central_diff(F&& f, std::vector<double>& x, std::size_t i, double h = 1e-5) {
  const double keep = x[i];
  x[i] = keep + h;
  const double up = f(x);
  x[i] = keep - h;
  const double down = f(x);
  x[i] = keep;
  return (up - down) / (2.0 * h);
}

// softmax then the family formula, directly; used for value checks
inline std::vector<double> softmax(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) s += (p[c] = std::exp(z[c] - m));
  for (double& v : p) v /= s;
  return p;
}

// macro-F1 from a confusion count, classes that never occur count as 0
inline double macro_f1(const Labels& truth, const Labels& pred, int classes) {
  double total = 0.0;
  for (int c = 0; c < classes; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == c && truth[i] == c) ++tp;
      if (pred[i] == c && truth[i] != c) ++fp;
      if (pred[i] != c && truth[i] == c) ++fn;
    }
    if (tp + fp + fn > 0) total += 2 * tp / (2 * tp + fp + fn);
  }
  return total / classes;
}

}  // namespace oracle
