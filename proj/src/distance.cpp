// SPDX-License-Identifier: Apache-2.0
#include "distance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <unordered_map>

#include "error.hpp"
#include "text.hpp"

namespace aepo {
namespace {

// Token ids per text plus clipped-count tables for each order n.
struct NgramProfile {
  size_t length = 0;
  std::vector<std::map<std::vector<uint32_t>, int>> counts;  // counts[n - 1]
};

class Vocabulary {
 public:
  std::vector<uint32_t> encode(std::string_view text) {
    std::vector<uint32_t> ids;
    for (auto tok : tokenize(text)) {
      auto [it, inserted] = ids_.try_emplace(std::string(tok), static_cast<uint32_t>(ids_.size()));
      ids.push_back(it->second);
    }
    return ids;
  }

 private:
  std::unordered_map<std::string, uint32_t> ids_;
};

NgramProfile make_profile(const std::vector<uint32_t>& ids, int max_n) {
  NgramProfile profile;
  profile.length = ids.size();
  profile.counts.resize(static_cast<size_t>(max_n));
  for (int n = 1; n <= max_n; ++n) {
    auto& table = profile.counts[static_cast<size_t>(n - 1)];
    for (size_t s = 0; s + static_cast<size_t>(n) <= ids.size(); ++s) {
      ++table[std::vector<uint32_t>(ids.begin() + static_cast<std::ptrdiff_t>(s),
                                    ids.begin() + static_cast<std::ptrdiff_t>(s) + n)];
    }
  }
  return profile;
}

double directed_score(const NgramProfile& hyp, const NgramProfile& ref, int max_n) {
  if (hyp.length == 0 || ref.length == 0) return hyp.length == ref.length ? 1.0 : 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto& hyp_counts = hyp.counts[static_cast<size_t>(n - 1)];
    const auto& ref_counts = ref.counts[static_cast<size_t>(n - 1)];
    long matches = 0;
    for (const auto& [gram, count] : hyp_counts) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matches += std::min(count, it->second);
    }
    const long total = std::max<long>(0, static_cast<long>(hyp.length) - n + 1);
    double precision;
    if (n == 1) {
      if (matches == 0) return 0.0;
      precision = static_cast<double>(matches) / static_cast<double>(total);
    } else {
      precision = static_cast<double>(matches + 1) / static_cast<double>(total + 1);
    }
    log_sum += std::log(precision);
  }
  const double c = static_cast<double>(hyp.length);
  const double r = static_cast<double>(ref.length);
  const double brevity = c > r ? 1.0 : std::exp(1.0 - r / c);
  return std::clamp(brevity * std::exp(log_sum / max_n), 0.0, 1.0);
}

double symmetric_distance(const NgramProfile& a, const NgramProfile& b, int max_n) {
  const double score = std::min(directed_score(a, b, max_n), directed_score(b, a, max_n));
  return std::clamp(1.0 - score, 0.0, 1.0);
}

void check_max_n(int max_n) {
  if (max_n < 1) throw Error(ErrorCode::kInvalidArgument, "max_n must be >= 1, got " + std::to_string(max_n));
}

}  // namespace

DistanceKind parse_distance_kind(std::string_view name) {
  if (name == "cosine") return DistanceKind::kCosine;
  if (name == "ngram") return DistanceKind::kNgram;
  throw Error(ErrorCode::kInvalidArgument, "unknown distance \"" + std::string(name) + "\" (expected cosine|ngram)");
}

const char* to_string(DistanceKind kind) {
  return kind == DistanceKind::kCosine ? "cosine" : "ngram";
}

DistanceMatrix DistanceMatrix::from_dense(size_t n, std::vector<double> entries) {
  if (entries.size() != n * n) {
    throw Error(ErrorCode::kInvalidArgument, "distance matrix needs " + std::to_string(n * n) + " entries, got " +
                                                 std::to_string(entries.size()));
  }
  for (size_t i = 0; i < n; ++i) {
    if (entries[i * n + i] != 0.0) {
      throw Error(ErrorCode::kInvariant, "distance matrix diagonal (" + std::to_string(i) + "," + std::to_string(i) + ") is nonzero");
    }
    for (size_t j = 0; j < n; ++j) {
      const double v = entries[i * n + j];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorCode::kInvariant, "distance (" + std::to_string(i) + "," + std::to_string(j) + ") = " +
                                               std::to_string(v) + " is outside [0, 1]");
      }
      if (v != entries[j * n + i]) {
        throw Error(ErrorCode::kInvariant, "distance matrix is asymmetric at (" + std::to_string(i) + "," +
                                               std::to_string(j) + ")");
      }
    }
  }
  return DistanceMatrix(n, std::move(entries));
}

double cosine_distance(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::kInvalidArgument, "cosine distance: dimension mismatch (" + std::to_string(u.size()) +
                                                 " vs " + std::to_string(v.size()) + ")");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    const double a = u[i];
    const double b = v[i];
    dot += a * b;
    nu += a * a;
    nv += b * b;
  }
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorCode::kInvalidArgument, "cosine distance: zero-norm vector");
  const double d = 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
  if (d < kCosineZeroSnap) return 0.0;
  return std::min(1.0, d);
}

double ngram_overlap_score(std::string_view hypothesis, std::string_view reference, int max_n) {
  check_max_n(max_n);
  Vocabulary vocab;
  const auto hyp = make_profile(vocab.encode(hypothesis), max_n);
  const auto ref = make_profile(vocab.encode(reference), max_n);
  return directed_score(hyp, ref, max_n);
}

double ngram_overlap_distance(std::string_view a, std::string_view b, int max_n) {
  check_max_n(max_n);
  Vocabulary vocab;
  const auto pa = make_profile(vocab.encode(a), max_n);
  const auto pb = make_profile(vocab.encode(b), max_n);
  return symmetric_distance(pa, pb, max_n);
}

DistanceMatrix build_distance_matrix(size_t n, const ElementDistance& distance) {
  std::vector<double> entries(n * n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const double d = distance(i, j);
      entries[i * n + j] = d;
      entries[j * n + i] = d;
    }
  }
  return DistanceMatrix::from_dense(n, std::move(entries));
}

DistanceMatrix build_distance_matrix(const CandidatePool& pool, DistanceKind kind,
                                     const EmbeddingSet* embeddings, int max_n) {
  if (kind == DistanceKind::kCosine) {
    if (embeddings == nullptr) {
      throw Error(ErrorCode::kInvalidArgument, "cosine distance for \"" + pool.id() + "\" requires embeddings");
    }
    check_alignment(pool, *embeddings);
    const auto& vecs = embeddings->vectors;
    return build_distance_matrix(pool.size(), [&](size_t i, size_t j) { return cosine_distance(vecs[i], vecs[j]); });
  }
  if (embeddings != nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "n-gram distance does not take embeddings");
  }
  check_max_n(max_n);
  Vocabulary vocab;
  std::vector<NgramProfile> profiles;
  profiles.reserve(pool.size());
  for (const auto& response : pool.responses) profiles.push_back(make_profile(vocab.encode(response), max_n));
  return build_distance_matrix(pool.size(), [&](size_t i, size_t j) {
    return symmetric_distance(profiles[i], profiles[j], max_n);
  });
}

std::vector<TriangleViolation> metric_violations(const DistanceMatrix& m, double tolerance) {
  std::vector<TriangleViolation> out;
  const size_t n = m.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t k = i + 1; k < n; ++k) {
      for (size_t j = 0; j < n; ++j) {
        if (j == i || j == k) continue;
        if (m(i, k) > m(i, j) + m(j, k) + tolerance) out.push_back({i, j, k});
      }
    }
  }
  return out;
}

}  // namespace aepo
