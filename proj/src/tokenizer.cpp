#include "halo/tokenizer.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "halo/error.hpp"

namespace halo {

TokenSequence ByteTokenizer::encode(std::string_view text) const {
  TokenSequence out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<TokenId>(c));
  return out;
}

std::string ByteTokenizer::decode(std::span<const TokenId> tokens) const {
  std::string out;
  out.reserve(tokens.size());
  for (TokenId t : tokens) {
    if (t < 0 || t > 255) {
      throw DataError("byte tokenizer cannot decode id " + std::to_string(t));
    }
    out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
  }
  return out;
}

std::string ByteTokenizer::token_text(TokenId id) const {
  if (id >= 0x20 && id < 0x7f) return std::string(1, static_cast<char>(id));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "<0x%02X>", static_cast<unsigned>(id & 0xff));
  return buf;
}

VocabTokenizer::VocabTokenizer(std::vector<std::pair<std::string, TokenId>> entries) {
  if (entries.empty()) throw ModelError("tokenizer vocabulary is empty");
  TokenId max_id = 0;
  for (const auto& [text, id] : entries) {
    if (id < 0) throw ModelError("tokenizer: negative token id for '" + text + "'");
    max_id = std::max(max_id, id);
  }
  by_id_.resize(static_cast<std::size_t>(max_id) + 1);
  for (auto& [text, id] : entries) {
    if (text.empty()) throw ModelError("tokenizer: empty token string for id " + std::to_string(id));
    if (by_id_[static_cast<std::size_t>(id)]) {
      throw ModelError("tokenizer: duplicate id " + std::to_string(id));
    }
    if (!by_text_.emplace(text, id).second) {
      throw ModelError("tokenizer: duplicate token string '" + text + "'");
    }
    max_token_bytes_ = std::max(max_token_bytes_, text.size());
    by_id_[static_cast<std::size_t>(id)] = std::move(text);
  }
}

VocabTokenizer VocabTokenizer::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open tokenizer file: " + path.string());
  std::vector<std::pair<std::string, TokenId>> entries;
  try {
    nlohmann::json j;
    in >> j;
    if (!j.is_array()) throw ModelError("tokenizer file must hold a JSON array: " + path.string());
    entries.reserve(j.size());
    for (const auto& item : j) {
      if (!item.is_array() || item.size() != 2) {
        throw ModelError("tokenizer entries must be [token-string, id] pairs: " + path.string());
      }
      entries.emplace_back(item[0].get<std::string>(), item[1].get<TokenId>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("cannot parse tokenizer file " + path.string() + ": " + e.what());
  }
  return VocabTokenizer(std::move(entries));
}

TokenSequence VocabTokenizer::encode(std::string_view text) const {
  TokenSequence out;
  std::size_t pos = 0;
  std::string key;
  while (pos < text.size()) {
    std::size_t len = std::min(max_token_bytes_, text.size() - pos);
    bool matched = false;
    for (; len > 0; --len) {
      key.assign(text.substr(pos, len));
      if (auto it = by_text_.find(key); it != by_text_.end()) {
        out.push_back(it->second);
        pos += len;
        matched = true;
        break;
      }
    }
    if (!matched) {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "0x%02X", static_cast<unsigned>(static_cast<unsigned char>(text[pos])));
      throw DataError("unknown token: no vocabulary entry matches byte " + std::string(buf) +
                      " at offset " + std::to_string(pos));
    }
  }
  return out;
}

std::string VocabTokenizer::decode(std::span<const TokenId> tokens) const {
  std::string out;
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= by_id_.size() || !by_id_[static_cast<std::size_t>(t)]) {
      throw DataError("tokenizer cannot decode id " + std::to_string(t));
    }
    out += *by_id_[static_cast<std::size_t>(t)];
  }
  return out;
}

std::string VocabTokenizer::token_text(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= by_id_.size() || !by_id_[static_cast<std::size_t>(id)]) {
    return "<unk:" + std::to_string(id) + ">";
  }
  return *by_id_[static_cast<std::size_t>(id)];
}

std::shared_ptr<const Tokenizer> load_tokenizer(
    const std::optional<std::filesystem::path>& path) {
  if (!path) return std::make_shared<ByteTokenizer>();
  return std::make_shared<VocabTokenizer>(VocabTokenizer::from_file(*path));
}

}  // namespace halo
