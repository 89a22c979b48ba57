#pragma once

// Corpus files.
//
// word mode:      UTF-8 text, one sentence per line, whitespace tokenized.
//                 Blank lines are skipped; the id is the 1-based line number.
// subword mode:   JSON lines {"id": .., "tokens": [{"surface": .., "joins_previous": ..}, ..]}.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sempa/core.hpp"
#include "sempa/errors.hpp"

namespace sempa {

struct CorpusSentence {
  std::string id;
  TokenizedMessage message;
};

inline TokenizationMode parse_tokenization_mode(const std::string& name) {
  if (name == "word") return TokenizationMode::word;
  if (name == "subword" || name == "pretokenized_subword") return TokenizationMode::pretokenized_subword;
  throw ConfigError("unknown tokenization mode '" + name + "' (expected word or subword)");
}

inline TokenizedMessage parse_pretokenized(const nlohmann::json& tokens) {
  std::vector<Token> out;
  for (const auto& t : tokens) {
    out.push_back(Token{out.size(), t.at("surface").get<std::string>(), t.value("joins_previous", false)});
  }
  return TokenizedMessage(std::move(out), TokenizationMode::pretokenized_subword);
}

inline std::vector<CorpusSentence> load_corpus(const std::string& path, TokenizationMode mode) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path);
  std::vector<CorpusSentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      if (mode == TokenizationMode::word) {
        out.push_back({std::to_string(line_no), TokenizedMessage::from_words(line)});
        continue;
      }
      const auto row = nlohmann::json::parse(line);
      std::string id = std::to_string(line_no);
      if (auto it = row.find("id"); it != row.end()) {
        id = it->is_string() ? it->get<std::string>() : it->dump();
      }
      out.push_back({std::move(id), parse_pretokenized(row.at("tokens"))});
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const PartitionError& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace sempa
