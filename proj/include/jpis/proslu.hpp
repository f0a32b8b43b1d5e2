#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpis/data.hpp"

namespace jpis::data {

// ProSLU release -> record-per-line corpus.
//
// Input: a directory with train/dev/test files (`train.json`, `dev.json` or
// `valid.json`, `test.json`), each a JSON array, an object keyed by
// utterance id, or JSON lines. Field mapping per utterance:
//
//   tokens  <- "tokens" | "text" | "utterance" | "文本"
//              (a string is split into Unicode code points)
//   tags    <- "tags" | "slots" | "bio" | "BIO" | "序列标注"
//              (array, or whitespace-separated string)
//   intent  <- "intent" | "意图"
//   up      <- "up" | "UP" | "user_profile" | "用户画像"
//   ca      <- "ca" | "CA" | "context_awareness" | "上下文信息"
//
// Profile blocks are objects mapping a field name to a numeric vector (in
// file order) or arrays of vectors. The manifest is inferred from the first
// training record; a field is flagged as a distribution when every vector
// seen for it sums to 1 +- 1e-4.

struct ConvertedCorpus {
  std::vector<CorpusRecord> train;
  std::vector<CorpusRecord> valid;
  std::vector<CorpusRecord> test;
  ProfileManifest manifest;
};

std::vector<std::string> split_code_points(const std::string& text);
/// Converts one utterance object; manifest inference is left to the caller.
CorpusRecord convert_proslu_record(const nlohmann::ordered_json& j);
ConvertedCorpus convert_proslu(const std::filesystem::path& in_dir);

}  // namespace jpis::data
