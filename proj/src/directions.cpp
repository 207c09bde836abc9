#include "halo/directions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "halo/error.hpp"
#include "halo/linalg.hpp"
#include "halo/tensor_io.hpp"

namespace halo {

std::string_view to_string(TransitionKind kind) {
  return kind == TransitionKind::correct ? "correct" : "hallucinated";
}

std::vector<TransitionVector> transition_vectors(std::span<const HiddenTriple> triples) {
  if (triples.empty()) throw DataError("transition vectors: no hidden-state triples");
  std::vector<TransitionVector> out;
  out.reserve(2 * triples.size());
  for (const auto& t : triples) {
    const auto& s1 = t.s1.values;
    const auto& s2 = t.s2.values;
    const auto& s3 = t.s3.values;
    if (s2.size() != s1.size() || s3.size() != s1.size()) {
      throw DataError("sample '" + t.sample_id + "': hidden states differ in length");
    }
    TransitionVector h{t.sample_id, TransitionKind::hallucinated, std::vector<float>(s1.size())};
    TransitionVector c{t.sample_id, TransitionKind::correct, std::vector<float>(s1.size())};
    for (std::size_t i = 0; i < s1.size(); ++i) {
      h.v[i] = s1[i] - s2[i];
      c.v[i] = s1[i] - s3[i];
    }
    out.push_back(std::move(h));
    out.push_back(std::move(c));
  }
  return out;
}

PrincipalComponent pca_first_component(const std::vector<std::vector<double>>& vectors) {
  const auto top = linalg::covariance_top_eigenpair(vectors);
  PrincipalComponent pc;
  pc.direction = top.vector;
  pc.explained_variance = top.value;
  pc.iterations = top.iterations;

  double mean_projection = 0.0;
  for (const auto& v : vectors) {
    double p = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) p += v[i] * pc.direction[i];
    mean_projection += p;
  }
  if (mean_projection < 0.0) {
    for (auto& x : pc.direction) x = -x;
  }
  return pc;
}

PrincipalComponent pca_first_component(std::span<const std::vector<float>> vectors) {
  std::vector<std::vector<double>> rows;
  rows.reserve(vectors.size());
  for (const auto& v : vectors) rows.emplace_back(v.begin(), v.end());
  return pca_first_component(rows);
}

DirectionPair fit_directions(std::span<const TransitionVector> vectors) {
  std::vector<std::vector<float>> corr, halluc;
  std::vector<std::string> ids;
  for (const auto& tv : vectors) {
    (tv.kind == TransitionKind::correct ? corr : halluc).push_back(tv.v);
    if (std::find(ids.begin(), ids.end(), tv.sample_id) == ids.end()) ids.push_back(tv.sample_id);
  }
  if (corr.size() < 2 || halluc.size() < 2) {
    throw DataError("direction fitting needs at least two samples of each kind");
  }
  auto c = pca_first_component(std::span<const std::vector<float>>(corr));
  auto h = pca_first_component(std::span<const std::vector<float>>(halluc));
  DirectionPair pair;
  pair.d_corr = std::move(c.direction);
  pair.d_halluc = std::move(h.direction);
  pair.explained_variance_corr = c.explained_variance;
  pair.explained_variance_halluc = h.explained_variance;
  pair.n_samples = ids.size();
  return pair;
}

float scalar_projection(std::span<const float> v, std::span<const double> d) {
  if (v.size() != d.size()) throw UsageError("projection of vectors with different lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += static_cast<double>(v[i]) * d[i];
  return static_cast<float>(s);
}

std::vector<VocabEntry> vocab_project(std::span<const double> direction,
                                      const WeightStore& weights, int k,
                                      const Tokenizer* tokenizer) {
  const auto& c = weights.config();
  if (direction.size() != static_cast<std::size_t>(c.hidden_size)) {
    throw UsageError("direction length does not match hidden_size");
  }
  if (k < 1 || k > c.vocab_size) throw UsageError("k must lie in [1, vocab_size]");

  std::vector<double> scores(static_cast<std::size_t>(c.vocab_size));
  for (int t = 0; t < c.vocab_size; ++t) {
    const auto row = weights.unembedding_row(t);
    double s = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) s += static_cast<double>(row[i]) * direction[i];
    scores[static_cast<std::size_t>(t)] = s;
  }
  std::vector<TokenId> ids(scores.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), [&](TokenId a, TokenId b) {
    const double sa = scores[static_cast<std::size_t>(a)];
    const double sb = scores[static_cast<std::size_t>(b)];
    return sa != sb ? sa > sb : a < b;
  });

  std::vector<VocabEntry> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const TokenId id = ids[static_cast<std::size_t>(i)];
    std::string text;
    if (tokenizer && static_cast<std::size_t>(id) < tokenizer->vocab_size()) {
      text = tokenizer->token_text(id);
    } else {
      text = "<id:" + std::to_string(id) + ">";
    }
    out.push_back({id, std::move(text), scores[static_cast<std::size_t>(id)]});
  }
  return out;
}

std::vector<ProjectionRecord> project_samples(std::span<const TransitionVector> vectors,
                                              const DirectionPair& pair) {
  std::vector<ProjectionRecord> out;
  std::map<std::string, std::size_t> index;
  std::vector<std::pair<bool, bool>> seen;
  for (const auto& tv : vectors) {
    auto [it, inserted] = index.try_emplace(tv.sample_id, out.size());
    if (inserted) {
      out.push_back({tv.sample_id, 0.0f, 0.0f});
      seen.emplace_back(false, false);
    }
    auto& rec = out[it->second];
    if (tv.kind == TransitionKind::hallucinated) {
      rec.p_h = scalar_projection(tv.v, pair.d_halluc);
      seen[it->second].first = true;
    } else {
      rec.p_c = scalar_projection(tv.v, pair.d_corr);
      seen[it->second].second = true;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!seen[i].first || !seen[i].second) {
      throw DataError("sample '" + out[i].sample_id + "' lacks a " +
                      (seen[i].first ? "correct" : "hallucinated") + " transition vector");
    }
  }
  return out;
}

std::filesystem::path directions_sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p.replace_extension(".json");
  return p;
}

std::string encode_directions(const DirectionPair& pair) {
  auto as_tensor = [](const std::vector<double>& d) {
    return Tensor({static_cast<std::int64_t>(d.size())}, std::vector<float>(d.begin(), d.end()));
  };
  TensorMap tensors;
  tensors.emplace("d_corr", as_tensor(pair.d_corr));
  tensors.emplace("d_halluc", as_tensor(pair.d_halluc));
  return encode_bundle(tensors, DType::f32);
}

std::string directions_sidecar(const DirectionPair& pair) {
  nlohmann::json side = {{"explained_variance_corr", pair.explained_variance_corr},
                         {"explained_variance_halluc", pair.explained_variance_halluc},
                         {"n_samples", pair.n_samples},
                         {"sign_convention", kSignConvention}};
  return side.dump(2) + "\n";
}

void save_directions(const std::filesystem::path& path, const DirectionPair& pair) {
  if (directions_sidecar_path(path) == path) {
    throw UsageError("direction file must not use the .json extension: " + path.string());
  }
  auto put = [](const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("cannot write " + p.string());
  };
  put(path, encode_directions(pair));
  put(directions_sidecar_path(path), directions_sidecar(pair));
}

DirectionPair load_directions(const std::filesystem::path& path) {
  TensorMap tensors;
  try {
    tensors = read_bundle(path);
  } catch (const ModelError& e) {
    throw DataError(e.what());
  }
  auto unit = [&](const char* name) {
    auto it = tensors.find(name);
    if (it == tensors.end() || it->second.shape.size() != 1) {
      throw DataError(path.string() + ": missing 1-D tensor '" + name + "'");
    }
    std::vector<double> d(it->second.data.begin(), it->second.data.end());
    double norm = 0.0;
    for (double x : d) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw DataError(path.string() + ": tensor '" + name + "' is not a valid direction");
    }
    for (auto& x : d) x /= norm;  // f32 storage loses the unit norm; restore it
    return d;
  };
  DirectionPair pair;
  pair.d_corr = unit("d_corr");
  pair.d_halluc = unit("d_halluc");
  if (pair.d_corr.size() != pair.d_halluc.size()) {
    throw DataError(path.string() + ": d_corr and d_halluc differ in length");
  }

  const auto side_path = directions_sidecar_path(path);
  std::ifstream in(side_path);
  if (!in) throw DataError("missing direction sidecar: " + side_path.string());
  try {
    nlohmann::json side;
    in >> side;
    if (side.at("sign_convention").get<std::string>() != kSignConvention) {
      throw DataError(side_path.string() + ": unsupported sign convention");
    }
    pair.explained_variance_corr = side.at("explained_variance_corr").get<double>();
    pair.explained_variance_halluc = side.at("explained_variance_halluc").get<double>();
    pair.n_samples = side.at("n_samples").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse direction sidecar " + side_path.string() + ": " + e.what());
  }
  return pair;
}

}  // namespace halo
