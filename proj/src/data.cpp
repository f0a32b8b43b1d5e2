#include "jpis/data.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "jpis/errors.hpp"

namespace jpis::data {

ParsedTag parse_tag(const std::string& tag) {
  if (tag == "O") return {};
  if (tag.size() > 2 && tag[1] == '-' && (tag[0] == 'B' || tag[0] == 'I')) {
    return {tag[0] == 'B' ? ParsedTag::Kind::Begin : ParsedTag::Kind::Inside,
            tag.substr(2)};
  }
  throw ValidationError("unknown tag '" + tag + "'");
}

SpanSet bio_decode_spans(std::span<const std::string> tags) {
  SpanSet spans;
  std::optional<Span> open;
  auto close = [&]() {
    if (open) spans.insert(*open);
    open.reset();
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    ParsedTag t = parse_tag(tags[i]);
    const int pos = static_cast<int>(i);
    switch (t.kind) {
      case ParsedTag::Kind::Outside:
        close();
        break;
      case ParsedTag::Kind::Begin:
        close();
        open = Span{pos, pos, std::move(t.type)};
        break;
      case ParsedTag::Kind::Inside:
        if (open && open->type == t.type) {
          open->end = pos;
        } else {
          close();
          open = Span{pos, pos, std::move(t.type)};
        }
        break;
    }
  }
  close();
  return spans;
}

std::vector<std::string> spans_to_bio(const SpanSet& spans, std::size_t length) {
  std::vector<std::string> tags(length, "O");
  for (const Span& s : spans) {
    if (s.start < 0 || s.end < s.start || static_cast<std::size_t>(s.end) >= length) {
      throw ValidationError("span out of bounds");
    }
    for (int i = s.start; i <= s.end; ++i) {
      if (tags[i] != "O") throw ValidationError("overlapping spans");
      tags[i] = (i == s.start ? "B-" : "I-") + s.type;
    }
  }
  return tags;
}

TokenVocabulary::TokenVocabulary() : TokenVocabulary(std::vector<std::string>{}) {}

TokenVocabulary::TokenVocabulary(const std::vector<std::string>& tokens) {
  tokens_ = {"<pad>", "<unk>"};
  for (const auto& t : tokens) {
    if (t == "<pad>" || t == "<unk>") continue;
    tokens_.push_back(t);
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ValidationError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

int TokenVocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> TokenVocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

LabelVocabulary::LabelVocabulary(std::vector<std::string> intents,
                                 std::vector<std::string> slot_types)
    : intents_(std::move(intents)), slot_types_(std::move(slot_types)) {
  tags_.push_back("O");
  for (const auto& s : slot_types_) {
    tags_.push_back("B-" + s);
    tags_.push_back("I-" + s);
  }
}

std::optional<int> LabelVocabulary::intent_id(const std::string& intent) const {
  auto it = std::find(intents_.begin(), intents_.end(), intent);
  if (it == intents_.end()) return std::nullopt;
  return static_cast<int>(it - intents_.begin());
}

std::optional<int> LabelVocabulary::tag_id(const std::string& tag) const {
  auto it = std::find(tags_.begin(), tags_.end(), tag);
  if (it == tags_.end()) return std::nullopt;
  return static_cast<int>(it - tags_.begin());
}

std::vector<std::string> LabelVocabulary::tag_names(std::span<const int> ids) const {
  std::vector<std::string> names;
  names.reserve(ids.size());
  for (int id : ids) names.push_back(tag(id));
  return names;
}

Vocabularies build_vocab(const std::vector<CorpusRecord>& records) {
  std::set<std::string> tokens, intents, slot_types;
  for (const auto& r : records) {
    tokens.insert(r.tokens.begin(), r.tokens.end());
    intents.insert(r.intent);
    for (const auto& tag : r.tags) {
      ParsedTag t = parse_tag(tag);
      if (t.kind != ParsedTag::Kind::Outside) slot_types.insert(t.type);
    }
  }
  return {TokenVocabulary({tokens.begin(), tokens.end()}),
          LabelVocabulary({intents.begin(), intents.end()},
                          {slot_types.begin(), slot_types.end()})};
}

void validate_record(const CorpusRecord& r, const ProfileManifest& manifest) {
  if (r.tokens.empty()) throw ValidationError("record has no tokens");
  if (r.tags.size() != r.tokens.size()) {
    throw ValidationError("tag count " + std::to_string(r.tags.size()) +
                          " differs from token count " +
                          std::to_string(r.tokens.size()));
  }
  if (r.intent.empty()) throw ValidationError("record has an empty intent");
  for (const auto& tag : r.tags) parse_tag(tag);
  encoder::validate_profile(r.profile, manifest);
}

nlohmann::json record_to_json(const CorpusRecord& r) {
  return nlohmann::json{{"tokens", r.tokens},
                        {"intent", r.intent},
                        {"tags", r.tags},
                        {"up", r.profile.up},
                        {"ca", r.profile.ca}};
}

CorpusRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("record is not a JSON object");
  for (const char* key : {"tokens", "intent", "tags", "up", "ca"}) {
    if (!j.contains(key)) {
      throw ValidationError(std::string("missing field '") + key + "'");
    }
  }
  try {
    CorpusRecord r;
    r.tokens = j.at("tokens").get<std::vector<std::string>>();
    r.intent = j.at("intent").get<std::string>();
    r.tags = j.at("tags").get<std::vector<std::string>>();
    r.profile.up = j.at("up").get<std::vector<std::vector<double>>>();
    r.profile.ca = j.at("ca").get<std::vector<std::vector<double>>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad field type: ") + e.what());
  }
}

std::vector<CorpusRecord> parse_corpus(std::istream& in, const ProfileManifest& manifest,
                                       const std::string& source) {
  std::vector<CorpusRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      CorpusRecord r = record_from_json(nlohmann::json::parse(line));
      validate_record(r, manifest);
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(source + ":" + std::to_string(line_no) +
                            ": malformed record: " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path,
                                      const ProfileManifest& manifest) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file " + path.string());
  return parse_corpus(in, manifest, path.string());
}

void write_corpus(std::ostream& out, const std::vector<CorpusRecord>& records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

void save_corpus(const std::filesystem::path& path,
                 const std::vector<CorpusRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write corpus file " + path.string());
  write_corpus(out, records);
}

}  // namespace jpis::data
