#include "ause/suffix_array.hpp"

#include <algorithm>
#include <limits>

#include "ause/errors.hpp"

namespace ause {
namespace {

// Induced sorting over int symbols in [0, upper]. Follows the classic
// two-pass formulation: place sorted LMS suffixes, induce L types left to
// right, then S types right to left; recurse on LMS substring names.
std::vector<int> sa_is(const std::vector<int>& s, int upper) {
  const int n = static_cast<int>(s.size());
  if (n == 0) return {};
  if (n == 1) return {0};
  if (n == 2) return s[0] < s[1] ? std::vector<int>{0, 1} : std::vector<int>{1, 0};

  std::vector<int> sa(n);
  // ls[i]: suffix i is S-type.
  std::vector<bool> ls(n);
  for (int i = n - 2; i >= 0; --i) {
    ls[i] = (s[i] == s[i + 1]) ? ls[i + 1] : (s[i] < s[i + 1]);
  }
  // sum_l[c]: start of the L bucket of c; sum_s[c]: start of the S bucket of c.
  std::vector<int> sum_l(upper + 1), sum_s(upper + 1);
  for (int i = 0; i < n; ++i) {
    if (!ls[i]) {
      ++sum_s[s[i]];
    } else {
      ++sum_l[s[i] + 1];
    }
  }
  for (int i = 0; i <= upper; ++i) {
    sum_s[i] += sum_l[i];
    if (i < upper) sum_l[i + 1] += sum_s[i];
  }

  auto induce = [&](const std::vector<int>& lms) {
    std::fill(sa.begin(), sa.end(), -1);
    std::vector<int> buf(upper + 1);
    std::copy(sum_s.begin(), sum_s.end(), buf.begin());
    for (int d : lms) {
      if (d == n) continue;
      sa[buf[s[d]]++] = d;
    }
    std::copy(sum_l.begin(), sum_l.end(), buf.begin());
    sa[buf[s[n - 1]]++] = n - 1;
    for (int i = 0; i < n; ++i) {
      int v = sa[i];
      if (v >= 1 && !ls[v - 1]) sa[buf[s[v - 1]]++] = v - 1;
    }
    std::copy(sum_l.begin(), sum_l.end(), buf.begin());
    for (int i = n - 1; i >= 0; --i) {
      int v = sa[i];
      if (v >= 1 && ls[v - 1]) sa[--buf[s[v - 1] + 1]] = v - 1;
    }
  };

  std::vector<int> lms_map(n + 1, -1);
  int m = 0;
  for (int i = 1; i < n; ++i) {
    if (!ls[i - 1] && ls[i]) lms_map[i] = m++;
  }
  std::vector<int> lms;
  lms.reserve(m);
  for (int i = 1; i < n; ++i) {
    if (!ls[i - 1] && ls[i]) lms.push_back(i);
  }

  induce(lms);

  if (m) {
    std::vector<int> sorted_lms;
    sorted_lms.reserve(m);
    for (int v : sa) {
      if (lms_map[v] != -1) sorted_lms.push_back(v);
    }
    std::vector<int> rec_s(m);
    int rec_upper = 0;
    rec_s[lms_map[sorted_lms[0]]] = 0;
    for (int i = 1; i < m; ++i) {
      int l = sorted_lms[i - 1];
      int r = sorted_lms[i];
      int end_l = (lms_map[l] + 1 < m) ? lms[lms_map[l] + 1] : n;
      int end_r = (lms_map[r] + 1 < m) ? lms[lms_map[r] + 1] : n;
      bool same = true;
      if (end_l - l != end_r - r) {
        same = false;
      } else {
        while (l < end_l) {
          if (s[l] != s[r]) break;
          ++l;
          ++r;
        }
        if (l == n || s[l] != s[r]) same = false;
      }
      if (!same) ++rec_upper;
      rec_s[lms_map[sorted_lms[i]]] = rec_upper;
    }

    auto rec_sa = sa_is(rec_s, rec_upper);
    for (int i = 0; i < m; ++i) sorted_lms[i] = lms[rec_sa[i]];
    induce(sorted_lms);
  }
  return sa;
}

}  // namespace

std::vector<std::uint32_t> build_suffix_array(std::span<const std::uint32_t> text,
                                              std::uint32_t alphabet_size) {
  if (text.size() >= static_cast<std::size_t>(std::numeric_limits<int>::max())) {
    throw ValidationError("text too long for suffix array construction");
  }
  if (alphabet_size == 0 && !text.empty()) throw ContractError("empty alphabet");
  std::vector<int> s(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] >= alphabet_size) throw ContractError("symbol outside alphabet");
    s[i] = static_cast<int>(text[i]);
  }
  auto sa = sa_is(s, static_cast<int>(alphabet_size) - 1 < 0 ? 0 : static_cast<int>(alphabet_size) - 1);
  return {sa.begin(), sa.end()};
}

}  // namespace ause
