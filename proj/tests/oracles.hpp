// Copyright 2026 The clmasp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace oracle {

// Longest common subsequence by enumerating every subsequence of `a` and
// testing it against `b`.
inline std::size_t brute_force_lcs(const std::vector<std::uint32_t>& a,
                                   const std::vector<std::uint32_t>& b) {
  std::size_t best = 0;
  const std::size_t n = a.size();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::size_t len = static_cast<std::size_t>(__builtin_popcount(mask));
    if (len <= best) continue;
    std::size_t j = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!((mask >> i) & 1)) continue;
      while (j < b.size() && b[j] != a[i]) ++j;
      if (j == b.size()) ok = false;
      else ++j;
    }
    if (ok) best = len;
  }
  return best;
}

inline std::size_t dp_lcs(const std::vector<std::uint32_t>& a,
                          const std::vector<std::uint32_t>& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  return t[a.size()][b.size()];
}

// F-measure from an LCS length, written out from the definition.
inline double rouge_from_lcs(std::size_t lcs, std::size_t la, std::size_t lb) {
  if (la == 0 || lb == 0 || lcs == 0) return 0.0;
  double p = static_cast<double>(lcs) / static_cast<double>(la);
  double r = static_cast<double>(lcs) / static_cast<double>(lb);
  return 2.0 * p * r / (p + r);
}

// Every sequence of length <= max_len over `alphabet` symbols, together with
// its full set of distinct subsequences. lcs(i, j) scans the subsequences of
// sequence i from longest to shortest and returns the first one that is also
// a subsequence of j.
class ExhaustiveLcs {
 public:
  ExhaustiveLcs(std::size_t max_len, std::uint32_t alphabet) : alphabet_(alphabet) {
    offset_.push_back(0);
    std::size_t count = 1;
    for (std::size_t len = 0; len <= max_len; ++len) {
      offset_.push_back(offset_.back() + count);
      count *= alphabet;
    }
    const std::size_t total = offset_.back();
    seqs_.reserve(total);
    for (std::size_t len = 0; len <= max_len; ++len) {
      std::size_t n = offset_[len + 1] - offset_[len];
      for (std::size_t v = 0; v < n; ++v) {
        std::vector<std::uint32_t> s(len);
        std::size_t x = v;
        for (std::size_t i = len; i-- > 0;) {
          s[i] = static_cast<std::uint32_t>(x % alphabet);
          x /= alphabet;
        }
        seqs_.push_back(std::move(s));
      }
    }
    words_ = (total + 63) / 64;
    is_sub_.assign(total * words_, 0);
    subs_.resize(total);
    for (std::size_t i = 0; i < total; ++i) {
      const auto& s = seqs_[i];
      std::vector<std::uint32_t> idx;
      for (std::uint32_t mask = 0; mask < (1u << s.size()); ++mask) {
        std::vector<std::uint32_t> sub;
        for (std::size_t k = 0; k < s.size(); ++k) {
          if ((mask >> k) & 1) sub.push_back(s[k]);
        }
        idx.push_back(static_cast<std::uint32_t>(index_of(sub)));
      }
      std::sort(idx.begin(), idx.end(), std::greater<>());
      idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
      for (std::uint32_t k : idx) is_sub_[i * words_ + k / 64] |= std::uint64_t{1} << (k % 64);
      subs_[i] = std::move(idx);  // indices grouped by length, longest first
    }
  }

  std::size_t size() const { return seqs_.size(); }
  const std::vector<std::uint32_t>& seq(std::size_t i) const { return seqs_[i]; }

  std::size_t lcs(std::size_t i, std::size_t j) const {
    const std::uint64_t* row = &is_sub_[j * words_];
    for (std::uint32_t k : subs_[i]) {
      if ((row[k / 64] >> (k % 64)) & 1) return seqs_[k].size();
    }
    return 0;
  }

 private:
  std::size_t index_of(const std::vector<std::uint32_t>& s) const {
    std::size_t v = 0;
    for (std::uint32_t c : s) v = v * alphabet_ + c;
    return offset_[s.size()] + v;
  }

  std::uint32_t alphabet_;
  std::vector<std::size_t> offset_;
  std::vector<std::vector<std::uint32_t>> seqs_;
  std::vector<std::vector<std::uint32_t>> subs_;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> is_sub_;
};

// P(Bin(n, eps) <= k) with eps = num/den, as an exact rational.
inline boost::multiprecision::cpp_rational binom_cdf_exact(unsigned n, unsigned num, unsigned den,
                                                            unsigned k) {
  using boost::multiprecision::cpp_int;
  using boost::multiprecision::cpp_rational;
  cpp_rational total = 0;
  cpp_int choose = 1;
  for (unsigned i = 0; i <= std::min(k, n); ++i) {
    if (i > 0) choose = choose * (n - i + 1) / i;
    cpp_int p = 1, q = 1;
    for (unsigned t = 0; t < i; ++t) p *= num;
    for (unsigned t = 0; t < n - i; ++t) q *= (den - num);
    cpp_int d = 1;
    for (unsigned t = 0; t < n; ++t) d *= den;
    total += cpp_rational(choose * p * q, d);
  }
  return total;
}

}  // namespace oracle
