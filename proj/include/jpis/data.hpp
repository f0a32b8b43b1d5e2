#pragma once

#include <compare>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpis/encoder.hpp"

namespace jpis::data {

using encoder::ProfileManifest;
using encoder::ProfileSet;

/// One utterance with its gold labels and supporting profile information.
struct CorpusRecord {
  std::vector<std::string> tokens;
  std::string intent;
  std::vector<std::string> tags;
  ProfileSet profile;

  bool operator==(const CorpusRecord&) const = default;
};

/// Typed token span, both ends inclusive.
struct Span {
  int start = 0;
  int end = 0;
  std::string type;

  auto operator<=>(const Span&) const = default;
};
using SpanSet = std::set<Span>;

struct ParsedTag {
  enum class Kind { Outside, Begin, Inside } kind = Kind::Outside;
  std::string type;
};
/// Parses "O", "B-X" or "I-X"; throws ValidationError for anything else.
ParsedTag parse_tag(const std::string& tag);

/// Maximal typed spans of a BIO sequence. An I-X that does not continue a
/// span of type X opens a new one.
SpanSet bio_decode_spans(std::span<const std::string> tags);
/// BIO encoding of non-overlapping spans over `length` tokens.
std::vector<std::string> spans_to_bio(const SpanSet& spans, std::size_t length);

class TokenVocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  TokenVocabulary();
  /// `tokens` are appended after <pad> and <unk> in the given order.
  explicit TokenVocabulary(const std::vector<std::string>& tokens);

  /// Id of `token`, or kUnk when unseen.
  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  /// Every entry including <pad> and <unk>.
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<int> encode(std::span<const std::string> tokens) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Frozen intent and slot-type inventories with the derived BIO tagset
/// O, B-X1, I-X1, B-X2, I-X2, ...
class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  LabelVocabulary(std::vector<std::string> intents,
                  std::vector<std::string> slot_types);

  const std::vector<std::string>& intents() const { return intents_; }
  const std::vector<std::string>& slot_types() const { return slot_types_; }
  const std::vector<std::string>& tags() const { return tags_; }
  std::size_t n_intents() const { return intents_.size(); }
  std::size_t n_slot_types() const { return slot_types_.size(); }
  std::size_t n_tags() const { return tags_.size(); }

  std::optional<int> intent_id(const std::string& intent) const;
  std::optional<int> tag_id(const std::string& tag) const;
  const std::string& intent(int id) const { return intents_.at(static_cast<std::size_t>(id)); }
  const std::string& tag(int id) const { return tags_.at(static_cast<std::size_t>(id)); }
  std::vector<std::string> tag_names(std::span<const int> ids) const;

  bool operator==(const LabelVocabulary& other) const {
    return intents_ == other.intents_ && slot_types_ == other.slot_types_;
  }

 private:
  std::vector<std::string> intents_;
  std::vector<std::string> slot_types_;
  std::vector<std::string> tags_;
};

struct Vocabularies {
  TokenVocabulary tokens;
  LabelVocabulary labels;
};

/// Token vocabulary and label inventories from (training) records, each
/// sorted lexicographically.
Vocabularies build_vocab(const std::vector<CorpusRecord>& records);

/// Checks token/tag lengths, tag syntax, and the profile against the manifest.
void validate_record(const CorpusRecord& record, const ProfileManifest& manifest);

nlohmann::json record_to_json(const CorpusRecord& record);
CorpusRecord record_from_json(const nlohmann::json& j);

/// One JSON object per line. Errors name `source` and the 1-based line.
std::vector<CorpusRecord> parse_corpus(std::istream& in, const ProfileManifest& manifest,
                                       const std::string& source = "<stream>");
std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path,
                                      const ProfileManifest& manifest);
void write_corpus(std::ostream& out, const std::vector<CorpusRecord>& records);
void save_corpus(const std::filesystem::path& path,
                 const std::vector<CorpusRecord>& records);

}  // namespace jpis::data
