// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "phoneme.hpp"
#include "testutil.hpp"

using namespace s2s;
namespace fs = std::filesystem;

TEST_CASE("inventory loader prepends the reserved symbols") {
  fs::path dir = testutil::temp_dir("phoneme");
  write_text_file(dir / "inv.txt", "a\nb\n");
  PhonemeInventory inv = load_inventory(dir / "inv.txt");
  REQUIRE(inv.size() == 4);
  CHECK(inv.symbol(0) == "[PAD]");
  CHECK(inv.symbol(1) == "[BLANK]");
  CHECK(inv.symbol(2) == "a");
  CHECK(inv.symbol(3) == "b");
}

TEST_CASE("inventory with explicit reserved symbols is accepted unchanged") {
  fs::path dir = testutil::temp_dir("phoneme");
  write_text_file(dir / "inv.txt", "[PAD]\n[BLANK]\nx\ny\nz\n");
  PhonemeInventory inv = load_inventory(dir / "inv.txt");
  CHECK(inv.size() == 5);
  CHECK(inv.lookup("z") == 4);
}

TEST_CASE("duplicate inventory symbols are rejected with the line number") {
  fs::path dir = testutil::temp_dir("phoneme");
  write_text_file(dir / "inv.txt", "a\nb\na\n");
  CHECK_THROWS_WITH_AS(load_inventory(dir / "inv.txt"), doctest::Contains("line 3"), DataError);
}

TEST_CASE("inventory save/load round trip") {
  PhonemeInventory inv = PhonemeInventory::synthetic(60);
  CHECK(inv.size() == 62);
  fs::path dir = testutil::temp_dir("phoneme");
  save_inventory(dir / "inv.txt", inv);
  PhonemeInventory again = load_inventory(dir / "inv.txt");
  CHECK(again.symbols == inv.symbols);
}

TEST_CASE("entity db parses ids and phoneme tokens") {
  PhonemeInventory inv = PhonemeInventory::from_symbols({"a", "b", "c"});
  fs::path dir = testutil::temp_dir("phoneme");
  write_text_file(dir / "ents.tsv", "# comment\ne1\ta b c\n");
  EntityDb db = load_entity_db(dir / "ents.tsv", inv);
  REQUIRE(db.size() == 1);
  CHECK(db.at(0).id == "e1");
  CHECK(db.at(0).phonemes == std::vector<int>{2, 3, 4});
}

TEST_CASE("comment-only entity file yields an empty db") {
  PhonemeInventory inv = PhonemeInventory::from_symbols({"a"});
  fs::path dir = testutil::temp_dir("phoneme");
  write_text_file(dir / "ents.tsv", "# nothing here\n");
  CHECK(load_entity_db(dir / "ents.tsv", inv).empty());
}

TEST_CASE("unknown tokens and duplicate ids are rejected") {
  PhonemeInventory inv = PhonemeInventory::from_symbols({"a"});
  fs::path dir = testutil::temp_dir("phoneme");
  write_text_file(dir / "bad.tsv", "e1\ta q\n");
  CHECK_THROWS_WITH_AS(load_entity_db(dir / "bad.tsv", inv),
                       doctest::Contains("unknown phoneme 'q' line 1"), DataError);
  write_text_file(dir / "dup.tsv", "e1\ta\ne1\ta\n");
  CHECK_THROWS_WITH_AS(load_entity_db(dir / "dup.tsv", inv),
                       doctest::Contains("duplicate entity id"), DataError);
  write_text_file(dir / "long.tsv", "e1\ta a a a\n");
  CHECK_THROWS_AS(load_entity_db(dir / "long.tsv", inv, 3), DataError);
}

TEST_CASE("entity db re-serializes to identical semantic content") {
  PhonemeInventory inv = PhonemeInventory::synthetic(10);
  std::mt19937_64 rng(4);
  EntityDb db;
  for (int i = 0; i < 25; ++i) {
    Entity e;
    e.id = "e" + std::to_string(i);
    int len = 1 + static_cast<int>(rng() % 8);
    for (int j = 0; j < len; ++j) e.phonemes.push_back(2 + static_cast<int>(rng() % 10));
    db.add(std::move(e));
  }
  fs::path dir = testutil::temp_dir("phoneme");
  save_entity_db(dir / "db.tsv", db, inv);
  EntityDb again = load_entity_db(dir / "db.tsv", inv);
  REQUIRE(again.size() == db.size());
  for (size_t i = 0; i < db.size(); ++i) {
    CHECK(again.at(i).id == db.at(i).id);
    CHECK(again.at(i).phonemes == db.at(i).phonemes);
  }
}

TEST_CASE("posteriorgram file round trip is bit exact") {
  PhonemeInventory inv = PhonemeInventory::synthetic(6);
  std::mt19937_64 rng(9);
  Posteriorgram pg;
  pg.frames = 7;
  pg.phones = inv.size();
  pg.rows.resize(static_cast<size_t>(pg.frames) * pg.phones);
  for (int t = 0; t < pg.frames; ++t) {
    double sum = 0.0;
    for (int p = 0; p < pg.phones; ++p) {
      pg.at(t, p) = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      sum += pg.at(t, p);
    }
    for (int p = 0; p < pg.phones; ++p) pg.at(t, p) /= sum;
  }
  fs::path dir = testutil::temp_dir("phoneme");
  write_posteriorgram(dir / "a.s2sp", pg);
  Posteriorgram back = read_posteriorgram(dir / "a.s2sp", inv);
  validate_posteriorgram(back);
  write_posteriorgram(dir / "b.s2sp", back);
  CHECK(read_binary_file(dir / "a.s2sp") == read_binary_file(dir / "b.s2sp"));
}

TEST_CASE("posteriorgram reader rejects truncation and dimension mismatch") {
  PhonemeInventory inv = PhonemeInventory::synthetic(4);
  fs::path dir = testutil::temp_dir("phoneme");
  Posteriorgram pg = one_hot_sequence({2, 3}, inv);
  write_posteriorgram(dir / "p.s2sp", pg);
  auto bytes = read_binary_file(dir / "p.s2sp");
  bytes.resize(bytes.size() - 3);
  write_binary_file(dir / "trunc.s2sp", bytes.data(), bytes.size());
  CHECK_THROWS_WITH_AS(read_posteriorgram(dir / "trunc.s2sp", inv),
                       doctest::Contains("unexpected end of file"), DataError);

  PhonemeInventory bigger = PhonemeInventory::synthetic(9);
  CHECK_THROWS_WITH_AS(read_posteriorgram(dir / "p.s2sp", bigger),
                       doctest::Contains("inventory"), DataError);
}

TEST_CASE("one_hot_sequence rows are exact") {
  PhonemeInventory inv = PhonemeInventory::synthetic(5);
  Posteriorgram pg = one_hot_sequence({2, 3}, inv);
  CHECK(pg.frames == 2);
  CHECK(pg.at(0, 2) == 1.0);
  CHECK(pg.at(1, 3) == 1.0);
  for (int t = 0; t < 2; ++t) {
    double sum = 0.0;
    for (int p = 0; p < pg.phones; ++p) sum += pg.at(t, p);
    CHECK(sum == 1.0);
  }
  CHECK_THROWS_AS(one_hot_sequence({}, inv), DataError);
}

TEST_CASE("validation rejects malformed posteriorgrams") {
  PhonemeInventory inv = PhonemeInventory::synthetic(4);
  Posteriorgram pg = one_hot_sequence({2}, inv);
  pg.rows[2] = 0.5;  // row no longer sums to one
  CHECK_THROWS_AS(validate_posteriorgram(pg), DataError);
  Posteriorgram long_pg = one_hot_sequence({2, 3, 4, 5}, inv);
  CHECK_THROWS_AS(validate_posteriorgram(long_pg, 3), DataError);
}
