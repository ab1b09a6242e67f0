// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnkit/textkit.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "cnkit/error.hpp"

namespace cnkit::text {

namespace {

const icu::Normalizer2& nfc_instance() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) {
    throw Error(std::string("ICU NFC normaliser unavailable: ") + u_errorName(status));
  }
  return *n;
}

icu::UnicodeString normalize(const icu::UnicodeString& in) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc_instance().normalize(in, status);
  if (U_FAILURE(status)) {
    throw Error(std::string("NFC normalisation failed: ") + u_errorName(status));
  }
  return out;
}

bool is_detached_punct(UChar32 c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case '"': case '\'': case '(': case ')': case '[': case ']':
    case 0x2014:  // em dash
      return true;
    default:
      return false;
  }
}

std::string to_utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

using IdSeq = std::vector<int>;

std::size_t edit_distance_ids(const IdSeq& hyp, const IdSeq& ref) {
  std::vector<std::size_t> prev(ref.size() + 1), cur(ref.size() + 1);
  for (std::size_t j = 0; j <= ref.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[ref.size()];
}

// Edit distance when it is at most `limit`, otherwise limit + 1. Only the
// diagonal band of width `limit` is filled.
std::size_t edit_distance_within(const IdSeq& hyp, const IdSeq& ref, std::size_t limit) {
  const std::size_t n = hyp.size(), m = ref.size(), over = limit + 1;
  if ((n > m ? n - m : m - n) > limit) return over;
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  std::size_t prev_hi = std::min(m, limit);
  for (std::size_t j = 0; j <= prev_hi; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t lo = i > limit ? i - limit : 0;
    const std::size_t hi = std::min(m, i + limit);
    std::size_t row_min = over;
    if (lo == 0) {
      cur[0] = i;
      row_min = i;
    }
    for (std::size_t j = std::max<std::size_t>(lo, 1); j <= hi; ++j) {
      std::size_t v = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      if (j <= prev_hi) v = std::min(v, prev[j] + 1);
      if (j > lo) v = std::min(v, cur[j - 1] + 1);
      cur[j] = std::min(v, over);
      row_min = std::min(row_min, cur[j]);
    }
    if (row_min > limit) return over;
    std::swap(prev, cur);
    prev_hi = hi;
  }
  return std::min(prev[m], over);
}

template <typename T>
std::vector<T> shift_block(const std::vector<T>& words, std::size_t start, std::size_t len, std::size_t dest) {
  std::vector<T> rest;
  rest.reserve(words.size());
  rest.insert(rest.end(), words.begin(), words.begin() + static_cast<long>(start));
  rest.insert(rest.end(), words.begin() + static_cast<long>(start + len), words.end());
  std::vector<T> out;
  out.reserve(words.size());
  out.insert(out.end(), rest.begin(), rest.begin() + static_cast<long>(dest));
  out.insert(out.end(), words.begin() + static_cast<long>(start), words.begin() + static_cast<long>(start + len));
  out.insert(out.end(), rest.begin() + static_cast<long>(dest), rest.end());
  return out;
}

// shift_block into a caller-owned buffer of the same size.
void shift_into(const IdSeq& words, std::size_t start, std::size_t len, std::size_t dest, IdSeq& out) {
  auto it = out.begin();
  const auto block = words.begin() + static_cast<long>(start);
  const auto block_end = block + static_cast<long>(len);
  std::size_t taken = 0;  // words of the remainder placed so far
  for (auto w = words.begin(); w != words.end(); ++w) {
    if (w == block) {
      w = block_end - 1;
      continue;
    }
    if (taken == dest) it = std::copy(block, block_end, it);
    *it++ = *w;
    ++taken;
  }
  if (taken == dest) std::copy(block, block_end, it);
}


}  // namespace

TokenSeq TokenSeq::from_tokens(std::vector<std::string> tokens) {
  TokenSeq seq;
  seq.source = detokenize(tokens);
  seq.tokens = std::move(tokens);
  return seq;
}

std::size_t NgramCounts::total() const {
  std::size_t sum = 0;
  for (const auto& [gram, c] : counts) sum += c;
  return sum;
}

std::size_t NgramCounts::count(const Ngram& g) const {
  auto it = counts.find(g);
  return it == counts.end() ? 0 : it->second;
}

std::string nfc(std::string_view utf8) {
  auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  return to_utf8(normalize(u));
}

TokenSeq tokenize(std::string_view text) {
  TokenSeq seq;
  seq.source = std::string(text);
  auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  u.toLower(icu::Locale::getRoot());
  u = normalize(u);

  icu::UnicodeString current;
  auto flush = [&] {
    if (!current.isEmpty()) {
      seq.tokens.push_back(to_utf8(current));
      current.remove();
    }
  };
  for (int32_t i = 0; i < u.length(); i = u.moveIndex32(i, 1)) {
    const UChar32 c = u.char32At(i);
    if (u_isUWhiteSpace(c)) {
      flush();
    } else if (is_detached_punct(c)) {
      flush();
      seq.tokens.push_back(to_utf8(icu::UnicodeString(c)));
    } else {
      current.append(c);
    }
  }
  flush();
  return seq;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

NgramCounts ngrams(const TokenSeq& seq, std::size_t n) {
  if (n == 0) throw ValidationError("n", "n-gram order must be >= 1");
  NgramCounts out;
  out.order = n;
  if (seq.size() < n) return out;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++out.counts[Ngram(seq.tokens.begin() + static_cast<long>(i), seq.tokens.begin() + static_cast<long>(i + n))];
  }
  return out;
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::size_t edit_distance(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  std::unordered_map<std::string, int> ids;
  auto intern = [&](const std::vector<std::string>& words) {
    IdSeq out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(ids.try_emplace(w, static_cast<int>(ids.size())).first->second);
    return out;
  };
  const IdSeq h = intern(hyp);
  const IdSeq r = intern(ref);
  return edit_distance_ids(h, r);
}

std::vector<std::string> apply_shift(const std::vector<std::string>& words, std::size_t start, std::size_t len,
                                     std::size_t dest) {
  if (len == 0 || start + len > words.size() || dest + len > words.size()) {
    throw ValidationError("shift", "block shift out of range");
  }
  return shift_block(words, start, len, dest);
}

TerStats ter_stats(const TokenSeq& candidate, const TokenSeq& reference, const TerOptions& opts) {
  if (reference.empty()) throw ValidationError("reference", "TER needs a non-empty reference");

  std::unordered_map<std::string, int> ids;
  auto intern = [&](const std::vector<std::string>& words) {
    IdSeq out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(ids.try_emplace(w, static_cast<int>(ids.size())).first->second);
    return out;
  };
  IdSeq hyp = intern(candidate.tokens);
  const IdSeq ref = intern(reference.tokens);

  TerStats stats;
  stats.reference_length = ref.size();
  std::size_t current = edit_distance_ids(hyp, ref);

  // Each round applies the single block shift, over every block and every
  // destination, that most reduces edit distance. First found wins ties.
  IdSeq moved(hyp.size());
  for (std::size_t iter = 0; iter < opts.max_shift_iterations && current > 1; ++iter) {
    const std::size_t n = hyp.size();
    std::size_t best_cost = current;  // shift plus remaining edits
    IdSeq best;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t len = 1; len <= opts.max_shift_size && i + len <= n; ++len) {
        for (std::size_t dest = 0; dest + len <= n; ++dest) {
          if (dest == i || best_cost < 2) continue;
          shift_into(hyp, i, len, dest, moved);
          const std::size_t d = edit_distance_within(moved, ref, best_cost - 2);
          if (d + 1 < best_cost) {
            best_cost = d + 1;
            best = moved;
          }
        }
      }
    }
    if (best.empty()) break;
    hyp = std::move(best);
    current = best_cost - 1;
    ++stats.shifts;
  }
  stats.edits = current;
  return stats;
}

double ter(const TokenSeq& candidate, const TokenSeq& reference, const TerOptions& opts) {
  return ter_stats(candidate, reference, opts).score();
}

}  // namespace cnkit::text
