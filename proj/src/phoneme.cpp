// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#include "phoneme.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace s2s {

namespace {

constexpr const char* kPadSymbol = "[PAD]";
constexpr const char* kBlankSymbol = "[BLANK]";

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

}  // namespace

PhonemeInventory PhonemeInventory::from_symbols(std::vector<std::string> symbols) {
  PhonemeInventory inv;
  // Reserved symbols are prepended when the caller did not provide them.
  if (symbols.empty() || symbols[0] != kPadSymbol) {
    symbols.insert(symbols.begin(), kPadSymbol);
  }
  if (symbols.size() < 2 || symbols[1] != kBlankSymbol) {
    symbols.insert(symbols.begin() + 1, kBlankSymbol);
  }
  if (symbols.size() < 3) throw DataError("inventory needs at least one real phoneme");
  inv.symbols = std::move(symbols);
  for (size_t i = 0; i < inv.symbols.size(); ++i) {
    auto [it, inserted] = inv.index.emplace(inv.symbols[i], static_cast<int>(i));
    if (!inserted) throw DataError("duplicate phoneme symbol: " + inv.symbols[i]);
  }
  return inv;
}

PhonemeInventory PhonemeInventory::synthetic(int phone_count) {
  if (phone_count < 1) throw ConfigError("inventory size must be positive");
  std::vector<std::string> symbols;
  symbols.reserve(phone_count);
  char buf[16];
  for (int i = 0; i < phone_count; ++i) {
    std::snprintf(buf, sizeof(buf), "p%02d", i);
    symbols.emplace_back(buf);
  }
  return from_symbols(std::move(symbols));
}

PhonemeInventory load_inventory(const std::filesystem::path& path) {
  std::vector<std::string> lines = split_lines(read_text_file(path));
  std::vector<std::string> symbols;
  std::unordered_map<std::string, int> seen;
  int line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    std::string sym = line;
    while (!sym.empty() && (sym.back() == ' ' || sym.back() == '\t')) sym.pop_back();
    if (sym.empty()) continue;
    if (seen.count(sym)) {
      throw DataError("duplicate phoneme '" + sym + "' line " + std::to_string(line_no));
    }
    seen[sym] = line_no;
    symbols.push_back(sym);
  }
  return PhonemeInventory::from_symbols(std::move(symbols));
}

void save_inventory(const std::filesystem::path& path, const PhonemeInventory& inv) {
  std::string out;
  for (const auto& s : inv.symbols) {
    out += s;
    out += '\n';
  }
  write_text_file(path, out);
}

void EntityDb::add(Entity entity) {
  if (entity.phonemes.empty()) throw DataError("entity with empty phoneme sequence: " + entity.id);
  auto [it, inserted] = by_id_.emplace(entity.id, entities_.size());
  if (!inserted) throw DataError("duplicate entity id: " + entity.id);
  entities_.push_back(std::move(entity));
}

const Entity& EntityDb::by_id(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw DataError("unknown entity id: " + id);
  return entities_[it->second];
}

int EntityDb::position(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? -1 : static_cast<int>(it->second);
}

EntityDb load_entity_db(const std::filesystem::path& path, const PhonemeInventory& inv,
                        int max_len) {
  EntityDb db;
  std::vector<std::string> lines = split_lines(read_text_file(path));
  int line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("missing tab separator line " + std::to_string(line_no));
    }
    Entity e;
    e.id = line.substr(0, tab);
    if (e.id.empty()) throw DataError("empty entity id line " + std::to_string(line_no));
    for (const auto& tok : split_ws(line.substr(tab + 1))) {
      int idx = inv.lookup(tok);
      if (idx < 0) {
        throw DataError("unknown phoneme '" + tok + "' line " + std::to_string(line_no));
      }
      if (idx == PhonemeInventory::kPad || idx == PhonemeInventory::kBlank) {
        throw DataError("reserved symbol '" + tok + "' in entity line " + std::to_string(line_no));
      }
      e.phonemes.push_back(idx);
    }
    if (e.phonemes.empty()) {
      throw DataError("entity without phonemes line " + std::to_string(line_no));
    }
    if (max_len > 0 && static_cast<int>(e.phonemes.size()) > max_len) {
      throw DataError("entity '" + e.id + "' exceeds max length " + std::to_string(max_len) +
                      " line " + std::to_string(line_no));
    }
    db.add(std::move(e));
  }
  return db;
}

void save_entity_db(const std::filesystem::path& path, const EntityDb& db,
                    const PhonemeInventory& inv) {
  std::string out;
  for (const auto& e : db.entities()) {
    out += e.id;
    out += '\t';
    for (size_t i = 0; i < e.phonemes.size(); ++i) {
      if (i) out += ' ';
      out += inv.symbol(e.phonemes[i]);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

int Posteriorgram::argmax_row(int t) const {
  const double* r = row(t);
  int best = 0;
  for (int p = 1; p < phones; ++p) {
    if (r[p] > r[best]) best = p;
  }
  return best;
}

void validate_posteriorgram(const Posteriorgram& pg, int max_frames) {
  if (pg.frames < 1) throw DataError("posteriorgram has no frames");
  if (max_frames > 0 && pg.frames > max_frames) {
    throw DataError("posteriorgram exceeds max frame count " + std::to_string(max_frames));
  }
  if (pg.rows.size() != static_cast<size_t>(pg.frames) * pg.phones) {
    throw DataError("posteriorgram buffer size mismatch");
  }
  for (int t = 0; t < pg.frames; ++t) {
    double sum = 0.0;
    for (int p = 0; p < pg.phones; ++p) {
      double v = pg.at(t, p);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DataError("posteriorgram entry out of [0,1] at frame " + std::to_string(t));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-5) {
      throw DataError("posteriorgram row does not sum to 1 at frame " + std::to_string(t));
    }
  }
}

namespace {
constexpr char kPgMagic[4] = {'S', '2', 'S', 'P'};
constexpr uint8_t kPgVersion = 0x01;

uint32_t read_u32le(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
}  // namespace

void write_posteriorgram(const std::filesystem::path& path, const Posteriorgram& pg) {
  std::string out;
  out.append(kPgMagic, 4);
  out.push_back(static_cast<char>(kPgVersion));
  uint32_t dims[2] = {static_cast<uint32_t>(pg.frames), static_cast<uint32_t>(pg.phones)};
  for (uint32_t d : dims) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((d >> (8 * i)) & 0xff));
  }
  for (double v : pg.rows) {
    float f = static_cast<float>(v);
    char buf[4];
    std::memcpy(buf, &f, 4);
    out.append(buf, 4);
  }
  write_binary_file(path, out.data(), out.size());
}

Posteriorgram read_posteriorgram(const std::filesystem::path& path,
                                 const PhonemeInventory& inv) {
  std::vector<uint8_t> raw = read_binary_file(path);
  if (raw.size() < 13) throw DataError("unexpected end of file: " + path.string());
  if (std::memcmp(raw.data(), kPgMagic, 4) != 0) {
    throw DataError("bad posteriorgram magic: " + path.string());
  }
  if (raw[4] != kPgVersion) throw DataError("unsupported posteriorgram version");
  uint32_t frames = read_u32le(raw.data() + 5);
  uint32_t phones = read_u32le(raw.data() + 9);
  if (phones != static_cast<uint32_t>(inv.size())) {
    throw DataError("posteriorgram phone count " + std::to_string(phones) +
                    " does not match inventory size " + std::to_string(inv.size()));
  }
  size_t need = 13 + 4ull * frames * phones;
  if (raw.size() < need) throw DataError("unexpected end of file: " + path.string());
  Posteriorgram pg;
  pg.frames = static_cast<int>(frames);
  pg.phones = static_cast<int>(phones);
  pg.rows.resize(static_cast<size_t>(frames) * phones);
  for (size_t i = 0; i < pg.rows.size(); ++i) {
    float f;
    std::memcpy(&f, raw.data() + 13 + 4 * i, 4);
    pg.rows[i] = static_cast<double>(f);
  }
  return pg;
}

Posteriorgram one_hot_sequence(const std::vector<int>& phonemes, const PhonemeInventory& inv) {
  if (phonemes.empty()) throw DataError("one_hot_sequence: empty phoneme sequence");
  Posteriorgram pg;
  pg.frames = static_cast<int>(phonemes.size());
  pg.phones = inv.size();
  pg.rows.assign(static_cast<size_t>(pg.frames) * pg.phones, 0.0);
  for (int t = 0; t < pg.frames; ++t) {
    int p = phonemes[t];
    if (p < 0 || p >= pg.phones) throw DataError("one_hot_sequence: index out of range");
    pg.at(t, p) = 1.0;
  }
  return pg;
}

}  // namespace s2s
