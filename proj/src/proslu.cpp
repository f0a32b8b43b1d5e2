#include "jpis/proslu.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "jpis/errors.hpp"

namespace jpis::data {
namespace {

// Ordered so profile fields keep their file order.
using json = nlohmann::ordered_json;

const json* find_any(const json& j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    auto it = j.find(k);
    if (it != j.end()) return &*it;
  }
  return nullptr;
}

const json& require_any(const json& j, std::initializer_list<const char*> keys,
                        const char* what) {
  if (const json* v = find_any(j, keys)) return *v;
  throw ValidationError(std::string("ProSLU record has no ") + what + " field");
}

std::vector<double> numeric_vector(const json& v, const std::string& field) {
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) {
    throw ValidationError("profile field '" + field + "' is not numeric");
  }
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) {
      throw ValidationError("profile field '" + field + "' is not numeric");
    }
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<std::pair<std::string, std::vector<double>>> profile_block(
    const json& block, const std::string& prefix) {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  if (block.is_object()) {
    for (const auto& [name, v] : block.items()) out.emplace_back(name, numeric_vector(v, name));
  } else if (block.is_array()) {
    std::size_t i = 0;
    for (const auto& v : block) {
      const std::string name = prefix + std::to_string(i++);
      out.emplace_back(name, numeric_vector(v, name));
    }
  } else {
    throw ValidationError("profile block must be an object or an array");
  }
  return out;
}

std::vector<json> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<json> records;
  try {
    json whole = json::parse(text);
    if (whole.is_array()) {
      records.assign(whole.begin(), whole.end());
    } else if (whole.is_object()) {
      for (auto& [id, v] : whole.items()) records.push_back(v);
    }
    return records;
  } catch (const json::parse_error&) {
    // fall through to JSON lines
  }
  std::istringstream lines(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return records;
}

// Field names and dims kept alongside the converted record.
struct RawRecord {
  CorpusRecord record;
  std::vector<std::string> up_names;
  std::vector<std::string> ca_names;
};

RawRecord convert_raw(const json& j) {
  RawRecord raw;
  CorpusRecord& r = raw.record;
  const json& text = require_any(j, {"tokens", "text", "utterance", "文本"}, "text");
  if (text.is_string()) {
    r.tokens = split_code_points(text.get<std::string>());
  } else {
    r.tokens = text.get<std::vector<std::string>>();
  }
  const json& tags = require_any(j, {"tags", "slots", "bio", "BIO", "序列标注"}, "tag");
  if (tags.is_string()) {
    std::istringstream ss(tags.get<std::string>());
    for (std::string t; ss >> t;) r.tags.push_back(t);
  } else {
    r.tags = tags.get<std::vector<std::string>>();
  }
  r.intent = require_any(j, {"intent", "意图"}, "intent").get<std::string>();
  for (const auto& [name, v] :
       profile_block(require_any(j, {"up", "UP", "user_profile", "用户画像"}, "UP"), "up")) {
    raw.up_names.push_back(name);
    r.profile.up.push_back(v);
  }
  for (const auto& [name, v] : profile_block(
           require_any(j, {"ca", "CA", "context_awareness", "上下文信息"}, "CA"), "ca")) {
    raw.ca_names.push_back(name);
    r.profile.ca.push_back(v);
  }
  return raw;
}

std::string sanitize(std::string name) {
  for (char& c : name) {
    if (c == ' ' || c == '\t' || c == '\n') c = '_';
  }
  return name;
}

}  // namespace

std::vector<std::string> split_code_points(const std::string& text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size();) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = lead < 0x80 ? 1 : (lead >> 5) == 0x6 ? 2 : (lead >> 4) == 0xe ? 3
                                                          : (lead >> 3) == 0x1e ? 4 : 1;
    len = std::min(len, text.size() - i);
    std::string cp = text.substr(i, len);
    i += len;
    if (cp == " " || cp == "\t" || cp == "\n" || cp == "\r") continue;
    out.push_back(std::move(cp));
  }
  return out;
}

CorpusRecord convert_proslu_record(const nlohmann::ordered_json& j) {
  return convert_raw(j).record;
}

ConvertedCorpus convert_proslu(const std::filesystem::path& in_dir) {
  auto pick = [&](std::initializer_list<const char*> names) {
    for (const char* n : names) {
      if (std::filesystem::exists(in_dir / n)) return in_dir / n;
    }
    throw ValidationError("convert-proslu: none of the expected split files found in " +
                          in_dir.string());
  };
  ConvertedCorpus out;
  std::vector<RawRecord> first;
  auto convert_split = [&](const std::filesystem::path& path,
                           std::vector<CorpusRecord>& dst) {
    std::size_t i = 0;
    for (const json& j : read_records(path)) {
      ++i;
      try {
        RawRecord raw = convert_raw(j);
        if (first.empty()) first.push_back(raw);
        dst.push_back(std::move(raw.record));
      } catch (const std::exception& e) {
        throw ValidationError(path.string() + ": record " + std::to_string(i) + ": " +
                              e.what());
      }
    }
  };
  convert_split(pick({"train.json", "train.jsonl"}), out.train);
  convert_split(pick({"dev.json", "valid.json", "dev.jsonl", "valid.jsonl"}), out.valid);
  convert_split(pick({"test.json", "test.jsonl"}), out.test);
  if (first.empty()) throw ValidationError("convert-proslu: empty training split");

  using encoder::ProfileKind;
  const RawRecord& proto = first.front();
  auto is_distribution = [&](bool up, std::size_t j) {
    for (const auto* split : {&out.train, &out.valid, &out.test}) {
      for (const auto& r : *split) {
        const auto& block = up ? r.profile.up : r.profile.ca;
        if (j >= block.size()) return false;
        double total = 0.0;
        for (double v : block[j]) total += v;
        if (std::abs(total - 1.0) > 1e-4) return false;
      }
    }
    return true;
  };
  for (std::size_t j = 0; j < proto.up_names.size(); ++j) {
    out.manifest.fields.push_back({ProfileKind::UserProfile, sanitize(proto.up_names[j]),
                                   proto.record.profile.up[j].size(), is_distribution(true, j)});
  }
  for (std::size_t j = 0; j < proto.ca_names.size(); ++j) {
    out.manifest.fields.push_back({ProfileKind::ContextAwareness,
                                   sanitize(proto.ca_names[j]),
                                   proto.record.profile.ca[j].size(),
                                   is_distribution(false, j)});
  }
  out.manifest.validate();
  for (const auto* split : {&out.train, &out.valid, &out.test}) {
    for (const auto& r : *split) validate_record(r, out.manifest);
  }
  return out;
}

}  // namespace jpis::data
