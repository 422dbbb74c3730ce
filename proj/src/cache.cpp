#include "dkse/cache.hpp"

#include <charconv>

#include "dkse/util.hpp"

namespace dkse {
namespace {

constexpr char kSplitMagic[] = "DKSE-SPLIT v1";
constexpr char kIdMagic[] = "DKSE-IDMAP v1";

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (end == text.size()) break;
    start = end + 1;
  }
  // Final newline produces one empty tail segment; names may be empty, so
  // strip exactly that artifact and nothing more.
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t end = line.find('\t', start);
    if (end == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, end - start));
    start = end + 1;
  }
}

int64_t parse_int(const std::string& s, size_t line_no) {
  int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  check(ec == std::errc{} && p == s.data() + s.size(),
        "line " + std::to_string(line_no) + ": bad integer '" + s + "'");
  return v;
}

void append_pairs(std::string& out, const char* tag,
                  const std::vector<LabeledPair>& pairs) {
  for (const auto& p : pairs) {
    out += tag;
    out += '\t';
    out += std::to_string(p.user);
    out += '\t';
    out += std::to_string(p.item);
    out += '\t';
    out += std::to_string(int(p.label));
    out += '\n';
  }
}

}  // namespace

std::string encode_split(const DatasetSplit& split) {
  std::string out = kSplitMagic;
  out += '\n';
  append_pairs(out, "train", split.train);
  append_pairs(out, "val", split.validation);
  append_pairs(out, "test", split.test);
  return out;
}

DatasetSplit decode_split(const std::string& text) {
  auto lines = split_lines(text);
  check(!lines.empty() && lines[0] == kSplitMagic,
        "not a DKSE-SPLIT v1 cache");
  DatasetSplit split;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = fields_of(lines[i]);
    check(f.size() == 4,
          "line " + std::to_string(i + 1) + ": expected 4 tab-separated fields");
    LabeledPair p;
    p.user = static_cast<int32_t>(parse_int(f[1], i + 1));
    p.item = static_cast<int32_t>(parse_int(f[2], i + 1));
    int64_t label = parse_int(f[3], i + 1);
    check(label == 0 || label == 1,
          "line " + std::to_string(i + 1) + ": label must be 0 or 1");
    p.label = static_cast<int8_t>(label);
    if (f[0] == "train")
      split.train.push_back(p);
    else if (f[0] == "val")
      split.validation.push_back(p);
    else if (f[0] == "test")
      split.test.push_back(p);
    else
      throw Error("line " + std::to_string(i + 1) + ": unknown split tag '" +
                  f[0] + "'");
  }
  return split;
}

std::string encode_idmaps(const IdMap& users, const IdMap& items) {
  std::string out = kIdMagic;
  out += '\n';
  out += "users\t" + std::to_string(users.size()) + '\n';
  for (const auto& name : users.names()) out += name + '\n';
  out += "items\t" + std::to_string(items.size()) + '\n';
  for (const auto& name : items.names()) out += name + '\n';
  return out;
}

void decode_idmaps(const std::string& text, IdMap* users, IdMap* items) {
  auto lines = split_lines(text);
  check(!lines.empty() && lines[0] == kIdMagic, "not a DKSE-IDMAP v1 sidecar");
  size_t i = 1;
  for (IdMap* target : {users, items}) {
    const char* section = target == users ? "users" : "items";
    check(i < lines.size(), "id map sidecar ends before the " +
                                std::string(section) + " section");
    auto f = fields_of(lines[i]);
    check(f.size() == 2 && f[0] == section,
          "line " + std::to_string(i + 1) + ": expected '" +
              std::string(section) + "\\tCOUNT'");
    int64_t count = parse_int(f[1], i + 1);
    check(count >= 0, "line " + std::to_string(i + 1) + ": negative count");
    ++i;
    *target = IdMap{};
    for (int64_t k = 0; k < count; ++k, ++i) {
      check(i < lines.size(), "id map sidecar truncated");
      int32_t id = target->get_or_add(lines[i]);
      check(id == static_cast<int32_t>(k),
            "line " + std::to_string(i + 1) + ": duplicate name '" + lines[i] +
                "'");
    }
  }
  check(i == lines.size(), "id map sidecar has trailing lines");
}

void save_split(const std::string& split_path, const std::string& idmap_path,
                const DatasetSplit& split) {
  write_file_atomic(split_path, encode_split(split));
  write_file_atomic(idmap_path, encode_idmaps(split.user_ids, split.item_ids));
}

DatasetSplit load_split(const std::string& split_path,
                        const std::string& idmap_path) {
  DatasetSplit split = decode_split(read_file(split_path));
  decode_idmaps(read_file(idmap_path), &split.user_ids, &split.item_ids);
  return split;
}

}  // namespace dkse
