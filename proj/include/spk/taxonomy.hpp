#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spk/common.hpp"
#include "spk/grid.hpp"

namespace spk {

enum class MacroClass : std::uint8_t { Stuff, Object, Part };

inline char macro_code(MacroClass m) {
  switch (m) {
    case MacroClass::Stuff: return 'S';
    case MacroClass::Object: return 'O';
    case MacroClass::Part: return 'P';
  }
  return '?';
}

inline const char* macro_name(MacroClass m) {
  switch (m) {
    case MacroClass::Stuff: return "stuff";
    case MacroClass::Object: return "object";
    case MacroClass::Part: return "part";
  }
  return "?";
}

inline std::optional<MacroClass> parse_macro(std::string_view code) {
  if (code == "S" || code == "s") return MacroClass::Stuff;
  if (code == "O" || code == "o") return MacroClass::Object;
  if (code == "P" || code == "p") return MacroClass::Part;
  return std::nullopt;
}

// Total map LabelId -> LabelId over a dictionary of a fixed size.
// Void always maps to void. Remaps compose functionally.
class LabelRemap {
 public:
  LabelRemap() = default;
  explicit LabelRemap(std::size_t dictionary_size)
      : table_(dictionary_size) {
    for (std::size_t i = 0; i < table_.size(); ++i) table_[i] = LabelId(i);
  }

  static LabelRemap identity(std::size_t dictionary_size) {
    return LabelRemap(dictionary_size);
  }

  std::size_t size() const { return table_.size(); }

  void set(LabelId from, LabelId to) {
    if (from == kVoidLabel && to != kVoidLabel) {
      throw ValidationError("void must map to void");
    }
    table_.at(from) = to;
  }

  LabelId apply(LabelId id) const {
    if (id >= table_.size()) {
      throw ValidationError("label " + std::to_string(id) +
                            " outside remap domain of size " +
                            std::to_string(table_.size()));
    }
    return table_[id];
  }

  LabelId operator()(LabelId id) const { return apply(id); }

  // this composed-after other: result(x) = this(other(x)).
  LabelRemap compose_after(const LabelRemap& other) const {
    LabelRemap out(other.size());
    for (std::size_t i = 0; i < other.size(); ++i) {
      out.table_[i] = apply(other.table_[i]);
    }
    return out;
  }

  LabelMask apply_to(const LabelMask& mask) const {
    LabelMask out(mask.height(), mask.width());
    for (std::size_t i = 0; i < mask.size(); ++i) out[i] = apply(mask[i]);
    return out;
  }

  friend bool operator==(const LabelRemap&, const LabelRemap&) = default;

 private:
  std::vector<LabelId> table_;
};

struct TaxonomyValidation {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

struct TopKSelection {
  std::vector<LabelId> labels;   // descending count, ties by ascending id
  bool shortfall = false;        // fewer labels with nonzero count than k
};

// Open-vocabulary label dictionary with a hypernym (is-a) forest, a
// part-of relation, and a macro class per label. Built single-writer,
// then frozen; queries on a frozen taxonomy are pure and shareable.
class Taxonomy {
 public:
  struct Entry {
    LabelId id = kVoidLabel;
    std::string name;
    std::vector<std::string> synonyms;
    MacroClass macro = MacroClass::Object;
  };

  // Number of user-defined labels; valid ids are 1..label_count().
  std::size_t label_count() const { return entries_.size(); }
  // One past the largest valid id; the size of any total remap table.
  std::size_t dictionary_size() const { return entries_.size() + 1; }

  bool contains(LabelId id) const { return id >= 1 && id <= entries_.size(); }

  const Entry& entry(LabelId id) const {
    check_id(id);
    return entries_[id - 1];
  }
  const std::string& name(LabelId id) const { return entry(id).name; }
  MacroClass macro(LabelId id) const { return entry(id).macro; }

  // Returns the existing id when the (case-insensitively folded) name or any
  // synonym is already present; otherwise appends a fresh entry. A macro
  // class conflicting with the existing entry is rejected.
  LabelId intern(std::string_view name, MacroClass macro) {
    check_mutable();
    std::string trimmed = trim(name);
    if (trimmed.empty()) {
      throw ValidationError("cannot intern an empty label name");
    }
    std::string key = fold_case(trimmed);
    auto it = by_name_.find(key);
    if (it != by_name_.end()) {
      const Entry& existing = entries_[it->second - 1];
      if (existing.macro != macro) {
        throw ValidationError("label '" + trimmed + "' already interned as " +
                              macro_name(existing.macro) +
                              ", conflicting macro class " + macro_name(macro));
      }
      return it->second;
    }
    LabelId id = LabelId(entries_.size() + 1);
    entries_.push_back(Entry{id, trimmed, {}, macro});
    hypernym_parent_.push_back(kVoidLabel);
    part_parents_.emplace_back();
    by_name_.emplace(std::move(key), id);
    return id;
  }

  void add_synonym(LabelId id, std::string_view synonym) {
    check_mutable();
    check_id(id);
    std::string trimmed = trim(synonym);
    if (trimmed.empty()) throw ValidationError("empty synonym");
    std::string key = fold_case(trimmed);
    auto it = by_name_.find(key);
    if (it != by_name_.end()) {
      if (it->second != id) {
        throw ValidationError("synonym '" + trimmed + "' already resolves to '" +
                              entries_[it->second - 1].name + "'");
      }
      return;
    }
    by_name_.emplace(std::move(key), id);
    entries_[id - 1].synonyms.push_back(trimmed);
  }

  std::optional<LabelId> resolve(std::string_view name) const {
    auto it = by_name_.find(fold_case(trim(name)));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }

  void set_hypernym(LabelId child, LabelId parent) {
    check_mutable();
    check_id(child);
    if (parent != kVoidLabel) check_id(parent);
    hypernym_parent_[child - 1] = parent;
  }

  // 0 when the label is a root of the hypernym forest.
  LabelId hypernym(LabelId id) const {
    check_id(id);
    return hypernym_parent_[id - 1];
  }

  void add_part_parent(LabelId part, LabelId object) {
    check_mutable();
    check_id(part);
    check_id(object);
    auto& parents = part_parents_[part - 1];
    if (std::find(parents.begin(), parents.end(), object) == parents.end()) {
      parents.push_back(object);
      std::sort(parents.begin(), parents.end());
    }
  }

  const std::vector<LabelId>& part_parents(LabelId part) const {
    check_id(part);
    return part_parents_[part - 1];
  }

  // Part classes registered under `object`, ascending by id.
  std::vector<LabelId> parts_of(LabelId object) const {
    check_id(object);
    std::vector<LabelId> parts;
    for (std::size_t i = 0; i < part_parents_.size(); ++i) {
      const auto& parents = part_parents_[i];
      if (std::find(parents.begin(), parents.end(), object) != parents.end()) {
        parts.push_back(LabelId(i + 1));
      }
    }
    return parts;
  }

  void freeze() {
    TaxonomyValidation report = validate();
    if (!report.ok()) {
      throw ValidationError("cannot freeze an invalid taxonomy: " +
                            report.errors.front());
    }
    frozen_ = true;
  }
  bool frozen() const { return frozen_; }

  // Depth of `id` in the hypernym forest; roots have depth 0.
  std::size_t hypernym_depth(LabelId id) const {
    check_id(id);
    std::size_t depth = 0;
    LabelId cur = id;
    while (hypernym_parent_[cur - 1] != kVoidLabel) {
      cur = hypernym_parent_[cur - 1];
      ++depth;
      if (depth > entries_.size()) {
        throw ValidationError("hypernym cycle reached from label " +
                              std::to_string(id));
      }
    }
    return depth;
  }

  // Maps every label to its ancestor at depth <= level in the hypernym
  // forest; labels at or above that depth map to themselves.
  LabelRemap merge_to_level(std::size_t level) const {
    LabelRemap remap(dictionary_size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      LabelId id = LabelId(i + 1);
      std::size_t depth = hypernym_depth(id);
      LabelId target = id;
      while (depth > level) {
        target = hypernym_parent_[target - 1];
        --depth;
      }
      remap.set(id, target);
    }
    return remap;
  }

  TaxonomyValidation validate() const {
    TaxonomyValidation report;
    // Hypernym edges must form a forest: every id in range, no cycles.
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      LabelId parent = hypernym_parent_[i];
      if (parent != kVoidLabel && !contains(parent)) {
        report.errors.push_back("hypernym parent " + std::to_string(parent) +
                                " of '" + entries_[i].name + "' is dangling");
      }
    }
    if (report.errors.empty()) {
      // 0 = unvisited, 1 = in progress, 2 = done
      std::vector<std::uint8_t> state(entries_.size(), 0);
      for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (state[i] != 0) continue;
        std::vector<std::size_t> chain;
        std::size_t cur = i;
        while (true) {
          if (state[cur] == 1) {
            report.errors.push_back("hypernym cycle through '" +
                                    entries_[cur].name + "'");
            break;
          }
          if (state[cur] == 2) break;
          state[cur] = 1;
          chain.push_back(cur);
          LabelId parent = hypernym_parent_[cur];
          if (parent == kVoidLabel) break;
          cur = parent - 1;
        }
        for (std::size_t n : chain) state[n] = 2;
      }
    }
    // Part-of relation: ids in range, acyclic (chains may nest).
    for (std::size_t i = 0; i < part_parents_.size(); ++i) {
      for (LabelId parent : part_parents_[i]) {
        if (!contains(parent)) {
          report.errors.push_back("part parent " + std::to_string(parent) +
                                  " of '" + entries_[i].name + "' is dangling");
        } else if (parent == LabelId(i + 1)) {
          report.errors.push_back("part self-loop on '" + entries_[i].name + "'");
        }
      }
    }
    if (report.errors.empty()) {
      std::vector<std::uint8_t> state(entries_.size(), 0);
      for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (state[i] == 0 && part_cycle_from(i, state)) {
          report.errors.push_back("part-of cycle through '" + entries_[i].name +
                                  "'");
          break;
        }
      }
    }
    if (report.errors.empty()) {
      std::size_t depth = max_part_chain_depth();
      if (depth > 3) {
        report.warnings.push_back("part-of chain of depth " +
                                  std::to_string(depth) +
                                  " exceeds the expected depth of 3");
      }
    }
    return report;
  }

  // Longest part-of chain, where a lone part under an object has depth 1.
  std::size_t max_part_chain_depth() const {
    std::vector<std::size_t> memo(entries_.size(), 0);
    std::vector<std::uint8_t> done(entries_.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      best = std::max(best, part_depth(i, memo, done));
    }
    return best;
  }

  const std::vector<Entry>& entries() const { return entries_; }

  // Labels with the k greatest pixel counts, descending; ties broken by
  // ascending id. Zero-count labels never qualify.
  static TopKSelection select_top_k_by_pixel_ratio(
      const std::map<LabelId, std::uint64_t>& pixel_counts, std::size_t k) {
    if (k == 0) throw ValidationError("k must be at least 1");
    std::vector<std::pair<LabelId, std::uint64_t>> ranked;
    ranked.reserve(pixel_counts.size());
    for (const auto& [id, count] : pixel_counts) {
      if (count > 0) ranked.emplace_back(id, count);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    TopKSelection out;
    out.shortfall = ranked.size() < k;
    std::size_t take = std::min(k, ranked.size());
    out.labels.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.labels.push_back(ranked[i].first);
    return out;
  }

  // -------------------------------------------------------------------------
  // Tab-separated taxonomy file, one label per line:
  //   id<TAB>name<TAB>syn1|syn2<TAB>S|O|P<TAB>hypernym_parent_or_0<TAB>part_parent_csv
  // Lines starting with '#' are comments. Ids must be dense 1..N.

  static Taxonomy load_tsv(std::istream& in) {
    struct Row {
      std::uint64_t id;
      std::string name, synonyms, macro, hypernym, part_parents;
    };
    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> fields = split(line, '\t');
      if (fields.size() != 6) {
        throw ValidationError("taxonomy line " + std::to_string(line_no) +
                              ": expected 6 tab-separated fields, got " +
                              std::to_string(fields.size()));
      }
      Row row;
      try {
        row.id = std::stoull(fields[0]);
      } catch (const std::exception&) {
        throw ValidationError("taxonomy line " + std::to_string(line_no) +
                              ": bad id '" + fields[0] + "'");
      }
      row.name = fields[1];
      row.synonyms = fields[2];
      row.macro = fields[3];
      row.hypernym = fields[4];
      row.part_parents = fields[5];
      rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(),
              [](const Row& a, const Row& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].id != i + 1) {
        throw ValidationError("taxonomy ids must be dense 1..N; id " +
                              std::to_string(i + 1) + " is " +
                              (rows[i].id == i ? "duplicated" : "missing"));
      }
    }
    Taxonomy t;
    for (const Row& row : rows) {
      auto macro = parse_macro(row.macro);
      if (!macro) {
        throw ValidationError("label '" + row.name + "': bad macro class '" +
                              row.macro + "'");
      }
      LabelId id = t.intern(row.name, *macro);
      if (id != row.id) {
        throw ValidationError("duplicate label name '" + row.name + "'");
      }
      for (const std::string& syn : split(row.synonyms, '|')) {
        if (!trim(syn).empty()) t.add_synonym(id, syn);
      }
    }
    for (const Row& row : rows) {
      std::uint64_t parent = parse_id_field(row.hypernym, row.name, "hypernym");
      if (parent != 0) {
        if (!t.contains(LabelId(parent))) {
          throw ValidationError("label '" + row.name + "': hypernym parent " +
                                std::to_string(parent) + " out of range");
        }
        t.set_hypernym(LabelId(row.id), LabelId(parent));
      }
      for (const std::string& field : split(row.part_parents, ',')) {
        std::string value = trim(field);
        if (value.empty()) continue;
        std::uint64_t object = parse_id_field(value, row.name, "part parent");
        if (object == 0 || !t.contains(LabelId(object))) {
          throw ValidationError("label '" + row.name + "': part parent " +
                                value + " out of range");
        }
        t.add_part_parent(LabelId(row.id), LabelId(object));
      }
    }
    TaxonomyValidation report = t.validate();
    if (!report.ok()) {
      throw ValidationError("invalid taxonomy file: " + report.errors.front());
    }
    t.frozen_ = true;
    return t;
  }

  static Taxonomy load_tsv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open taxonomy file " + path.string());
    return load_tsv(in);
  }

  std::string to_tsv() const {
    std::ostringstream out;
    out << "# id\tname\tsynonyms\tmacro\thypernym_parent\tpart_parents\n";
    for (const Entry& e : entries_) {
      out << e.id << '\t' << e.name << '\t';
      for (std::size_t i = 0; i < e.synonyms.size(); ++i) {
        if (i) out << '|';
        out << e.synonyms[i];
      }
      out << '\t' << macro_code(e.macro) << '\t' << hypernym_parent_[e.id - 1]
          << '\t';
      const auto& parents = part_parents_[e.id - 1];
      for (std::size_t i = 0; i < parents.size(); ++i) {
        if (i) out << ',';
        out << parents[i];
      }
      out << '\n';
    }
    return out.str();
  }

 private:
  void check_id(LabelId id) const {
    if (!contains(id)) {
      throw ValidationError("label id " + std::to_string(id) +
                            " not in dictionary of " +
                            std::to_string(entries_.size()) + " labels");
    }
  }

  void check_mutable() const {
    if (frozen_) throw ValidationError("taxonomy is frozen");
  }

  bool part_cycle_from(std::size_t node, std::vector<std::uint8_t>& state) const {
    state[node] = 1;
    for (LabelId parent : part_parents_[node]) {
      std::size_t p = parent - 1;
      if (state[p] == 1) return true;
      if (state[p] == 0 && part_cycle_from(p, state)) return true;
    }
    state[node] = 2;
    return false;
  }

  std::size_t part_depth(std::size_t node, std::vector<std::size_t>& memo,
                         std::vector<std::uint8_t>& done) const {
    if (done[node]) return memo[node];
    done[node] = 1;
    std::size_t best = 0;
    for (LabelId parent : part_parents_[node]) {
      best = std::max(best, part_depth(parent - 1, memo, done) + 1);
    }
    memo[node] = best;
    return best;
  }

  static std::string trim(std::string_view s) {
    std::size_t begin = 0, end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return std::string(s.substr(begin, end - begin));
  }

  // ASCII-only case folding; non-ASCII bytes compare verbatim.
  static std::string fold_case(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
      c = char(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      std::size_t pos = s.find(sep, start);
      if (pos == std::string::npos) {
        out.push_back(s.substr(start));
        return out;
      }
      out.push_back(s.substr(start, pos - start));
      start = pos + 1;
    }
  }

  static std::uint64_t parse_id_field(const std::string& field,
                                      const std::string& label,
                                      const char* what) {
    try {
      return std::stoull(field);
    } catch (const std::exception&) {
      throw ValidationError("label '" + label + "': bad " + what + " '" +
                            field + "'");
    }
  }

  std::vector<Entry> entries_;
  std::vector<LabelId> hypernym_parent_;
  std::vector<std::vector<LabelId>> part_parents_;
  std::unordered_map<std::string, LabelId> by_name_;
  bool frozen_ = false;
};

}  // namespace spk
