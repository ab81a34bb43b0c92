#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lut {

inline constexpr std::string_view kBlankToken = "<blk>";
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kSosToken = "<sos>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kUnkToken = "<unk>";

// Dense token <-> id table.
//
// Source layout: <blk>=0, <unk>=1, words..., <pad>, <sos>, <eos>. The leading
// block [0, ctc_classes()) is exactly the CTC label space, so a source id is
// its own CTC class and <pad> never enters it.
// Target layout: <pad>=0, <sos>=1, <eos>=2, <unk>=3, words... (no blank).
class Vocab {
 public:
  static Vocab source(const std::vector<std::string>& words);
  static Vocab target(const std::vector<std::string>& words);
  // One token per line, line number = id. The layout is validated.
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  bool is_source() const { return blank_ >= 0; }
  // Id of `token`, or <unk> when absent.
  int id(std::string_view token) const;
  const std::string& token(int id) const;
  std::vector<int> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const int> ids) const;

  int blank() const;
  int pad() const { return pad_; }
  int sos() const { return sos_; }
  int eos() const { return eos_; }
  int unk() const { return unk_; }
  bool is_special(int id) const;
  // Ids of ordinary words, in order.
  std::vector<int> word_ids() const;
  // Number of CTC output classes (blank + unk + words); source vocab only.
  std::size_t ctc_classes() const;

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  explicit Vocab(std::vector<std::string> tokens);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int blank_ = -1, pad_ = -1, sos_ = -1, eos_ = -1, unk_ = -1;
};

}  // namespace lut
