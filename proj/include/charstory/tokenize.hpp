#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "charstory/text.hpp"

namespace charstory::corpus {

namespace detail {

inline bool is_alpha(char ch) {
  return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z');
}

inline bool is_split_punct(char ch) {
  switch (ch) {
    case '.': case ',': case '!': case '?': case '"':
    case ';': case ':': case '(': case ')':
      return true;
    default:
      return false;
  }
}

inline void tokenize_chunk(std::string_view chunk, std::vector<std::string>& out) {
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  const std::size_t n = chunk.size();
  std::size_t i = 0;
  while (i < n) {
    char c = chunk[i];
    if (c == '[') {
      auto close = chunk.find(']', i + 1);
      if (close != std::string_view::npos && close > i + 1) {
        flush();
        out.emplace_back(chunk.substr(i, close - i + 1));
        i = close + 1;
        continue;
      }
    }
    if (is_split_punct(c)) {
      flush();
      out.emplace_back(1, c);
      ++i;
      continue;
    }
    if (c == '\'') {
      bool nt = !word.empty() && (word.back() == 'n' || word.back() == 'N') && i + 1 < n &&
                (chunk[i + 1] == 't' || chunk[i + 1] == 'T') &&
                (i + 2 == n || !is_alpha(chunk[i + 2]));
      if (nt) {
        std::string contraction{word.back(), c, chunk[i + 1]};
        word.pop_back();
        flush();
        out.push_back(std::move(contraction));
        i += 2;
        continue;
      }
      flush();
      if (i + 1 < n && is_alpha(chunk[i + 1])) {
        word.push_back(c);  // clitic such as 's or 're
      } else {
        out.emplace_back(1, c);
      }
      ++i;
      continue;
    }
    word.push_back(c);
    ++i;
  }
  flush();
}

}  // namespace detail

/// Whitespace tokenisation with punctuation split off, "n't" and clitics
/// ('s, 're, ...) separated, and bracketed placeholders such as "[female]"
/// kept whole. Case is preserved; see tokenize() for the lowercased form.
inline std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (auto chunk : split_ws(text)) detail::tokenize_chunk(chunk, out);
  return out;
}

/// Lowercased tokens, e.g. "[female] didn't agree" -> [female] did n't agree.
inline std::vector<std::string> tokenize(std::string_view text) {
  auto tokens = split_tokens(text);
  for (auto& t : tokens) t = to_lower(t);
  return tokens;
}

/// Splits a token stream after each sentence-final mark (. ! ?).
inline std::vector<std::vector<std::string>> split_sentences(const std::vector<std::string>& tokens) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> cur;
  for (const auto& t : tokens) {
    cur.push_back(t);
    if (t == "." || t == "!" || t == "?") {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace charstory::corpus
