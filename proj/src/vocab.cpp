#include "lut/vocab.hpp"

#include <fstream>

#include "lut/error.hpp"

namespace lut {

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const int id = static_cast<int>(i);
    if (!index_.emplace(tokens_[i], id).second) {
      throw FormatError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
    if (tokens_[i] == kBlankToken) blank_ = id;
    if (tokens_[i] == kPadToken) pad_ = id;
    if (tokens_[i] == kSosToken) sos_ = id;
    if (tokens_[i] == kEosToken) eos_ = id;
    if (tokens_[i] == kUnkToken) unk_ = id;
  }
  if (pad_ < 0 || sos_ < 0 || eos_ < 0 || unk_ < 0) {
    throw FormatError("vocabulary lacks a reserved token");
  }
  if (blank_ >= 0) {
    const int n = static_cast<int>(tokens_.size());
    if (blank_ != 0 || unk_ != 1 || pad_ != n - 3 || sos_ != n - 2 || eos_ != n - 1) {
      throw FormatError("source vocabulary must be <blk> <unk> words... <pad> <sos> <eos>");
    }
  } else if (pad_ != 0 || sos_ != 1 || eos_ != 2 || unk_ != 3) {
    throw FormatError("target vocabulary must be <pad> <sos> <eos> <unk> words...");
  }
}

Vocab Vocab::source(const std::vector<std::string>& words) {
  std::vector<std::string> t{std::string(kBlankToken), std::string(kUnkToken)};
  t.insert(t.end(), words.begin(), words.end());
  t.emplace_back(kPadToken);
  t.emplace_back(kSosToken);
  t.emplace_back(kEosToken);
  return Vocab(std::move(t));
}

Vocab Vocab::target(const std::vector<std::string>& words) {
  std::vector<std::string> t{std::string(kPadToken), std::string(kSosToken),
                             std::string(kEosToken), std::string(kUnkToken)};
  t.insert(t.end(), words.begin(), words.end());
  return Vocab(std::move(t));
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw FormatError("empty line in vocabulary " + path.string());
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) os << t << '\n';
}

int Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? unk_ : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw UsageError("token id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocab::decode(std::span<const int> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

int Vocab::blank() const {
  if (blank_ < 0) throw UsageError("target vocabulary has no blank symbol");
  return blank_;
}

bool Vocab::is_special(int id) const {
  return id == blank_ || id == pad_ || id == sos_ || id == eos_ || id == unk_;
}

std::vector<int> Vocab::word_ids() const {
  std::vector<int> ids;
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    if (!is_special(i)) ids.push_back(i);
  }
  return ids;
}

std::size_t Vocab::ctc_classes() const {
  if (blank_ < 0) throw UsageError("target vocabulary has no CTC label space");
  return static_cast<std::size_t>(pad_);
}

}  // namespace lut
