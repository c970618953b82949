#pragma once

#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "docparse/text.hpp"

// Minimal tag-soup scanner for the table subset of HTML. Positions are byte
// offsets into the scanned string so callers can splice the source verbatim.
namespace docparse::html {

struct Attribute {
  std::string name;  // lower-cased
  std::string value;
  bool has_value = false;
  std::size_t value_begin = 0;  // span of the raw value token, quotes included
  std::size_t value_end = 0;
};

struct Tag {
  std::string name;  // lower-cased; "!" for comments/doctype
  bool closing = false;
  bool self_closing = false;
  std::size_t begin = 0;  // offset of '<'
  std::size_t end = 0;    // one past '>'
  std::size_t name_end = 0;
  std::vector<Attribute> attributes;

  const Attribute* find(std::string_view attr) const {
    for (const auto& a : attributes)
      if (a.name == attr) return &a;
    return nullptr;
  }
};

enum class TagScan { Tag, Text, Unterminated };

namespace detail {

inline bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':';
}

inline bool is_ws(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace detail

/// Tries to read a tag starting at s[pos] == '<'. A '<' not followed by a
/// letter, '/' or '!' is plain text (e.g. "a < b").
inline TagScan read_tag(std::string_view s, std::size_t pos, Tag& tag) {
  using detail::is_name_char;
  using detail::is_ws;
  tag = Tag{};
  tag.begin = pos;
  std::size_t i = pos + 1;
  if (i >= s.size()) return TagScan::Text;

  if (s[i] == '!') {
    if (s.substr(i, 3) == "!--") {
      const auto close = s.find("-->", i + 3);
      if (close == std::string_view::npos) return TagScan::Unterminated;
      tag.name = "!";
      tag.end = close + 3;
      return TagScan::Tag;
    }
    const auto close = s.find('>', i);
    if (close == std::string_view::npos) return TagScan::Unterminated;
    tag.name = "!";
    tag.end = close + 1;
    return TagScan::Tag;
  }

  if (s[i] == '/') {
    tag.closing = true;
    ++i;
  }
  if (i >= s.size() || !std::isalpha(static_cast<unsigned char>(s[i]))) return TagScan::Text;

  const std::size_t name_begin = i;
  while (i < s.size() && is_name_char(s[i])) ++i;
  tag.name = text::to_lower_ascii(s.substr(name_begin, i - name_begin));
  tag.name_end = i;

  while (true) {
    while (i < s.size() && is_ws(s[i])) ++i;
    if (i >= s.size()) return TagScan::Unterminated;
    if (s[i] == '>') {
      tag.end = i + 1;
      return TagScan::Tag;
    }
    if (s[i] == '/') {
      if (i + 1 < s.size() && s[i + 1] == '>') {
        tag.self_closing = true;
        tag.end = i + 2;
        return TagScan::Tag;
      }
      ++i;
      continue;
    }
    Attribute attr;
    const std::size_t attr_begin = i;
    while (i < s.size() && !is_ws(s[i]) && s[i] != '=' && s[i] != '>' &&
           !(s[i] == '/' && i + 1 < s.size() && s[i + 1] == '>'))
      ++i;
    attr.name = text::to_lower_ascii(s.substr(attr_begin, i - attr_begin));
    std::size_t j = i;
    while (j < s.size() && is_ws(s[j])) ++j;
    if (j < s.size() && s[j] == '=') {
      ++j;
      while (j < s.size() && is_ws(s[j])) ++j;
      if (j >= s.size()) return TagScan::Unterminated;
      attr.has_value = true;
      attr.value_begin = j;
      if (s[j] == '"' || s[j] == '\'') {
        const char quote = s[j];
        const auto close = s.find(quote, j + 1);
        if (close == std::string_view::npos) return TagScan::Unterminated;
        attr.value = std::string(s.substr(j + 1, close - j - 1));
        i = close + 1;
      } else {
        std::size_t k = j;
        while (k < s.size() && !is_ws(s[k]) && s[k] != '>') ++k;
        attr.value = std::string(s.substr(j, k - j));
        i = k;
      }
      attr.value_end = i;
    }
    if (!attr.name.empty()) tag.attributes.push_back(std::move(attr));
  }
}

/// Escapes a value for use inside a double-quoted attribute.
inline std::string escape_attribute(std::string_view v) {
  std::string out;
  out.reserve(v.size());
  for (char c : v) {
    switch (c) {
      case '"': out += "&quot;"; break;
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string unescape_attribute(std::string_view v) {
  std::string out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == '&') {
      const auto match = [&](std::string_view ent) { return v.substr(i, ent.size()) == ent; };
      if (match("&quot;")) { out.push_back('"'); i += 5; continue; }
      if (match("&amp;")) { out.push_back('&'); i += 4; continue; }
      if (match("&lt;")) { out.push_back('<'); i += 3; continue; }
      if (match("&gt;")) { out.push_back('>'); i += 3; continue; }
      if (match("&#39;")) { out.push_back('\''); i += 4; continue; }
    }
    out.push_back(v[i]);
  }
  return out;
}

inline std::string escape_text(std::string_view v) {
  std::string out;
  out.reserve(v.size());
  for (char c : v) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

/// All well-formed `<img>` start tags of a fragment, in document order.
inline std::vector<Tag> find_img_tags(std::string_view s) {
  std::vector<Tag> out;
  std::size_t pos = 0;
  while ((pos = s.find('<', pos)) != std::string_view::npos) {
    Tag tag;
    const TagScan scan = read_tag(s, pos, tag);
    if (scan == TagScan::Tag) {
      if (!tag.closing && tag.name == "img") out.push_back(tag);
      pos = tag.end;
    } else {
      ++pos;
    }
  }
  return out;
}

/// Returns `tag` re-emitted with its src attribute set to `src`. Everything
/// else in the tag is copied byte for byte.
inline std::string with_src(std::string_view source, const Tag& tag, std::string_view src) {
  const std::string quoted = "\"" + escape_attribute(src) + "\"";
  std::string out;
  if (const Attribute* attr = tag.find("src"); attr && attr->has_value) {
    out.append(source.substr(tag.begin, attr->value_begin - tag.begin));
    out.append(quoted);
    out.append(source.substr(attr->value_end, tag.end - attr->value_end));
  } else if (attr) {
    // bare `src` with no value: insert one right after the name
    const std::size_t name_pos = source.find("src", tag.name_end);
    const std::size_t after = (name_pos == std::string_view::npos || name_pos >= tag.end)
                                  ? tag.name_end
                                  : name_pos + 3;
    out.append(source.substr(tag.begin, after - tag.begin));
    out.append("=" + quoted);
    out.append(source.substr(after, tag.end - after));
  } else {
    out.append(source.substr(tag.begin, tag.name_end - tag.begin));
    out.append(" src=" + quoted);
    out.append(source.substr(tag.name_end, tag.end - tag.name_end));
  }
  return out;
}

}  // namespace docparse::html
