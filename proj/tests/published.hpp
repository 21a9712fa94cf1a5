// SPDX-License-Identifier: Apache-2.0
//
// Readers for the reference LaTeX fixture: the four prompt boxes as plain
// text and the averaged score block. Used as reference data by the prompt,
// report and acceptance checks.
#pragma once

#include <array>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lexcomm/digest.hpp"
#include "lexcomm/text.hpp"

namespace lexcomm::test {

inline std::string published_source() { return read_file(LEXCOMM_PROMPT_SOURCE); }

inline std::string strip_command(std::string s, const std::string& cmd) {
  const std::string open = "\\" + cmd + "{";
  std::size_t pos = 0;
  while ((pos = s.find(open, pos)) != std::string::npos) {
    const auto close = s.find('}', pos + open.size());
    s = s.substr(0, pos) + s.substr(pos + open.size(), close - pos - open.size()) + s.substr(close + 1);
  }
  return s;
}

// LaTeX box body to plain prompt text: emphasis removed, enumerate items
// numbered, surrounding whitespace trimmed.
inline std::string to_plain(std::string body) {
  body = strip_command(body, "textbf");
  body = strip_command(body, "textit");
  std::string out;
  int item = 0;
  std::istringstream in(body);
  for (std::string line; std::getline(in, line);) {
    const auto t = std::string(text::trim(line));
    if (t == "\\begin{enumerate}" || t == "\\end{enumerate}") continue;
    if (t.starts_with("\\item ")) {
      out += std::to_string(++item) + ". " + t.substr(6) + "\n";
    } else {
      out += line + "\n";
    }
  }
  return std::string(text::trim(out));
}

inline std::vector<std::string> prompt_boxes(const std::string& source) {
  std::vector<std::string> boxes;
  const std::string begin = "\\begin{tcolorbox}[";
  const std::string end = "\\end{tcolorbox}";
  std::size_t pos = 0;
  while ((pos = source.find(begin, pos)) != std::string::npos) {
    std::size_t i = pos + begin.size();
    for (int depth = 1; depth > 0; ++i) {
      if (source[i] == '[') ++depth;
      if (source[i] == ']') --depth;
    }
    const auto stop = source.find(end, i);
    boxes.push_back(to_plain(source.substr(i, stop - i)));
    pos = stop;
  }
  return boxes;
}

/// Merge prompt (en, de) then rubric prompt (en, de).
struct PublishedPrompts {
  std::string merge_en, merge_de, judge_en, judge_de;
};

inline const PublishedPrompts& published_prompts() {
  static const PublishedPrompts p = [] {
    const auto b = prompt_boxes(published_source());
    if (b.size() != 4) throw std::runtime_error("expected four prompt boxes");
    return PublishedPrompts{b[0], b[1], b[2], b[3]};
  }();
  return p;
}

struct PublishedCell {
  std::string value;  // as printed, two decimals
  bool bold = false;
};

/// model -> criterion (rubric order) -> {human, llm}.
using PublishedAverages = std::map<std::string, std::array<std::array<PublishedCell, 2>, 5>>;

inline PublishedAverages published_averages() {
  const auto source = published_source();
  const auto start = source.find("Average score across legal provisions");
  const auto mid = source.find("\\midrule", start);
  const auto stop = source.find("\\bottomrule", mid);
  if (start == std::string::npos || mid == std::string::npos || stop == std::string::npos) {
    throw std::runtime_error("average score block not found");
  }
  PublishedAverages out;
  std::istringstream rows(source.substr(mid + 8, stop - mid - 8));
  const std::regex cell_re(R"((\\textbf\{)?([0-9]\.[0-9]{2})\}?)");
  for (std::string line; std::getline(rows, line);) {
    if (text::trim(line).empty()) continue;
    const auto amp = line.find('&');
    const std::string model(text::trim(line.substr(0, amp)));
    std::vector<PublishedCell> cells;
    for (std::sregex_iterator it(line.begin() + static_cast<std::ptrdiff_t>(amp), line.end(), cell_re), end; it != end;
         ++it) {
      cells.push_back({(*it)[2].str(), (*it)[1].matched});
    }
    if (cells.size() != 10) throw std::runtime_error("unexpected average row: " + line);
    for (std::size_t c = 0; c < 5; ++c) out[model][c] = {cells[2 * c], cells[2 * c + 1]};
  }
  return out;
}

}  // namespace lexcomm::test
