#pragma once
// Reference implementations the library is checked against. None of them
// share code with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "arcweaver/core/model.hpp"

namespace arcweaver::oracles {

// Independent tokenizer and set arithmetic for the oracle.
inline std::vector<std::string> oracle_tokens(const Character& c) {
  std::vector<std::string> names = {c.preferred_name};
  names.insert(names.end(), c.alternative_names.begin(), c.alternative_names.end());
  std::vector<std::string> out;
  for (const auto& name : names) {
    std::string word;
    for (char ch : name + " ") {
      unsigned char u = static_cast<unsigned char>(ch);
      bool in_word = (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || (u >= '0' && u <= '9') || u >= 0x80;
      if (in_word) {
        word += (u >= 'A' && u <= 'Z') ? static_cast<char>(u + 32) : ch;
      } else if (!word.empty()) {
        bool seen = false;
        for (const auto& t : out) seen = seen || t == word;
        if (!seen) out.push_back(word);
        word.clear();
      }
    }
  }
  return out;
}

inline double oracle_jaccard(const Character& a, const Character& b) {
  auto ta = oracle_tokens(a);
  auto tb = oracle_tokens(b);
  std::size_t inter = 0;
  for (const auto& x : ta) {
    for (const auto& y : tb) inter += x == y ? 1 : 0;
  }
  std::size_t uni = ta.size() + tb.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline Character random_character(std::mt19937& rng, int id) {
  static const std::vector<std::string> pool = {"Nora", "Hale", "Dr.", "sam", "OKAFOR", "Frost", "jerry",
                                                "Webb", "Chief", "O'Neil", "Zoë", "st.", "Ann-Marie", "7"};
  auto name = [&] {
    std::string s;
    int words = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < words; ++i) s += (i ? " " : "") + pool[rng() % pool.size()];
    return s;
  };
  Character c{"c" + std::to_string(id), name(), {}, "S"};
  int alts = static_cast<int>(rng() % 3);
  for (int i = 0; i < alts; ++i) c.alternative_names.insert(name());
  return c;
}

using Matrix = std::vector<std::vector<double>>;

// Cyclic Jacobi rotations on a symmetric matrix; returns eigenvalues sorted
// descending. Written independently of the library code path.
inline std::vector<double> jacobi_eigenvalues(Matrix a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i][i];
  std::sort(out.rbegin(), out.rend());
  return out;
}

inline Matrix covariance(const Matrix& rows) {
  const std::size_t n = rows.size(), d = rows[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j] / static_cast<double>(n);
  Matrix c(d, std::vector<double>(d, 0.0));
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / static_cast<double>(n - 1);
  return c;
}

inline double sample_variance(const std::vector<std::array<double, 3>>& pts, std::size_t axis) {
  double mean = 0;
  for (const auto& p : pts) mean += p[axis];
  mean /= static_cast<double>(pts.size());
  double v = 0;
  for (const auto& p : pts) v += (p[axis] - mean) * (p[axis] - mean);
  return v / static_cast<double>(pts.size() - 1);
}

// Rows c0*b0 + c1*b1 + c2*b2 + offset for random coefficients: rank 3 after centering.
inline Matrix rank3_rows(std::mt19937& rng, std::size_t n, std::size_t d) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix basis(3, std::vector<double>(d));
  for (auto& b : basis)
    for (auto& x : b) x = u(rng);
  std::vector<double> offset(d);
  for (auto& x : offset) x = u(rng);
  Matrix rows(n, offset);
  for (auto& r : rows) {
    double c[3] = {u(rng), u(rng), u(rng)};
    for (std::size_t j = 0; j < d; ++j) r[j] += c[0] * basis[0][j] + c[1] * basis[1][j] + c[2] * basis[2][j];
  }
  return rows;
}

// Largest |original distance - projected distance| over all pairs.
inline double worst_distance_error(const Matrix& rows, const std::vector<std::array<double, 3>>& points) {
  double worst = 0;
  const std::size_t n = rows.size(), d = rows[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      double orig = 0, proj = 0;
      for (std::size_t j = 0; j < d; ++j) orig += (rows[i][j] - rows[k][j]) * (rows[i][j] - rows[k][j]);
      for (std::size_t a = 0; a < 3; ++a) proj += (points[i][a] - points[k][a]) * (points[i][a] - points[k][a]);
      worst = std::max(worst, std::abs(std::sqrt(orig) - std::sqrt(proj)));
    }
  }
  return worst;
}

}  // namespace arcweaver::oracles
