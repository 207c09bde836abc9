#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace halo {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual TokenSequence encode(std::string_view text) const = 0;
  virtual std::string decode(std::span<const TokenId> tokens) const = 0;
  virtual std::size_t vocab_size() const = 0;
  // Display form of a single token (used for vocabulary projections).
  virtual std::string token_text(TokenId id) const = 0;
};

// Identity mapping between bytes and ids 0..255. Total in both directions.
class ByteTokenizer final : public Tokenizer {
 public:
  TokenSequence encode(std::string_view text) const override;
  std::string decode(std::span<const TokenId> tokens) const override;
  std::size_t vocab_size() const override { return 256; }
  std::string token_text(TokenId id) const override;
};

// Vocabulary loaded from a JSON array of [token-string, id] pairs. Encoding
// is greedy longest match; text that no token covers is an error.
class VocabTokenizer final : public Tokenizer {
 public:
  explicit VocabTokenizer(std::vector<std::pair<std::string, TokenId>> entries);
  static VocabTokenizer from_file(const std::filesystem::path& path);

  TokenSequence encode(std::string_view text) const override;
  std::string decode(std::span<const TokenId> tokens) const override;
  std::size_t vocab_size() const override { return by_id_.size(); }
  std::string token_text(TokenId id) const override;

 private:
  std::unordered_map<std::string, TokenId> by_text_;
  std::vector<std::optional<std::string>> by_id_;
  std::size_t max_token_bytes_ = 0;
};

// Absent path selects the byte-level tokenizer.
std::shared_ptr<const Tokenizer> load_tokenizer(
    const std::optional<std::filesystem::path>& path);

}  // namespace halo
