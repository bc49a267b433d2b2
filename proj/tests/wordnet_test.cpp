#include <gtest/gtest.h>

#include <algorithm>

#include "charstory/wordnet.hpp"
#include "test_support.hpp"

namespace wn = charstory::wordnet;
using charstory::testing::TempDir;
using wn::CharacterKind;

namespace {

// Five synsets: entity <- organism <- {person, animal}; fido is an
// instance of animal. Two license lines lead the data file.
constexpr const char* kData =
    "  1 This software and database is being provided\n"
    "  2 under a license.\n"
    "00000001 03 n 01 entity 0 000 | that which exists\n"
    "00000002 03 n 01 organism 0 001 @ 00000001 n 0000 | a living thing\n"
    "00000003 03 n 02 person 0 individual 0 001 @ 00000002 n 0000 | a human being\n"
    "00000004 03 n 01 animal 0 001 @ 00000002 n 0000 | a living organism\n"
    "00000005 03 n 01 Fido 0 002 @i 00000004 n 0000 ~ 00000001 n 0000 | a dog's name\n";

constexpr const char* kIndex =
    "  1 license\n"
    "entity n 1 0 1 0 00000001\n"
    "organism n 1 1 @ 1 0 00000002\n"
    "person n 1 1 @ 1 0 00000003\n"
    "individual n 1 1 @ 1 0 00000003\n"
    "animal n 1 1 @ 1 0 00000004\n"
    "fido n 1 1 @ 1 0 00000005\n";

constexpr const char* kExc = "people person\n";

void write_db(const TempDir& dir, const std::string& data = kData, const std::string& index = kIndex,
              const std::string& exc = kExc) {
  charstory::write_file(dir / "data.noun", data);
  charstory::write_file(dir / "index.noun", index);
  charstory::write_file(dir / "noun.exc", exc);
}

wn::Lexicon fixture_lexicon() {
  TempDir dir("wn-fixture");
  write_db(dir);
  return wn::parse_database(dir.path());
}

CharacterKind kind_from(const std::string& s) {
  if (s == "Person") return CharacterKind::Person;
  if (s == "Animal") return CharacterKind::Animal;
  return CharacterKind::NotACharacter;
}

}  // namespace

TEST(WordnetParse, FixtureHasFiveSynsetsAndItsEdges) {
  auto lex = fixture_lexicon();
  ASSERT_EQ(lex.synsets().size(), 5u);
  EXPECT_TRUE(lex.at(1).hypernyms.empty());
  EXPECT_EQ(lex.at(2).hypernyms, std::vector<wn::SynsetOffset>{1});
  EXPECT_EQ(lex.at(3).hypernyms, std::vector<wn::SynsetOffset>{2});
  EXPECT_EQ(lex.at(4).hypernyms, std::vector<wn::SynsetOffset>{2});
  // the antonym pointer is not a hypernym edge
  EXPECT_EQ(lex.at(5).hypernyms, std::vector<wn::SynsetOffset>{4});
  EXPECT_EQ(lex.at(3).lemmas, (std::vector<std::string>{"person", "individual"}));
  EXPECT_EQ(lex.at(5).lemmas, std::vector<std::string>{"fido"});
  EXPECT_EQ(lex.at(5).gloss, "a dog's name");
  EXPECT_EQ(lex.person_root(), 3u);
  EXPECT_EQ(lex.animal_root(), 4u);
}

TEST(WordnetParse, IndexLookupIsCaseInsensitive) {
  auto lex = fixture_lexicon();
  EXPECT_TRUE(lex.contains("Fido"));
  EXPECT_TRUE(lex.contains("PERSON"));
  EXPECT_FALSE(lex.contains("dog"));
}

TEST(WordnetParse, DanglingHypernymIsParseError) {
  TempDir dir;
  std::string data = kData;
  data += "00000006 03 n 01 ghost 0 001 @ 00000099 n 0000 | points nowhere\n";
  write_db(dir, data);
  EXPECT_THROW(wn::parse_database(dir.path()), charstory::ParseError);
}

TEST(WordnetParse, MalformedRecordCarriesLineNumber) {
  TempDir dir;
  std::string data = kData;
  data += "0000000x 03 n 01 broken 0 000 | bad offset\n";
  write_db(dir, data);
  try {
    wn::parse_database(dir.path());
    FAIL() << "expected ParseError";
  } catch (const charstory::ParseError& e) {
    EXPECT_EQ(e.line(), 8u);
  }
}

TEST(WordnetParse, TruncatedPointerListIsParseError) {
  TempDir dir;
  std::string data = kData;
  data += "00000006 03 n 01 stub 0 002 @ 00000001 n 0000 | short\n";
  write_db(dir, data);
  EXPECT_THROW(wn::parse_database(dir.path()), charstory::ParseError);
}

TEST(WordnetParse, HypernymCycleIsRejected) {
  TempDir dir;
  std::string data = kData;
  data += "00000006 03 n 01 egg 0 001 @ 00000007 n 0000 | x\n";
  data += "00000007 03 n 01 hen 0 001 @ 00000006 n 0000 | x\n";
  write_db(dir, data);
  EXPECT_THROW(wn::parse_database(dir.path()), charstory::ParseError);
}

TEST(WordnetParse, MissingFileIsIoError) {
  TempDir dir;
  write_db(dir);
  std::filesystem::remove(dir / "noun.exc");
  EXPECT_THROW(wn::parse_database(dir.path()), charstory::IoError);
}

TEST(WordnetParse, MissingAnimalIsLexiconIncomplete) {
  TempDir dir;
  std::string index = kIndex;
  index.erase(index.find("animal n"), std::string("animal n 1 1 @ 1 0 00000004\n").size());
  write_db(dir, kData, index);
  EXPECT_THROW(wn::parse_database(dir.path()), charstory::LexiconIncomplete);
}

TEST(WordnetParse, SerializeRoundTripKeepsSynsetsAndEdges) {
  auto lex = fixture_lexicon();
  TempDir dir;
  wn::write_database(lex, dir.path());
  auto again = wn::parse_database(dir.path());
  ASSERT_EQ(again.synsets().size(), lex.synsets().size());
  for (const auto& [off, s] : lex.synsets()) {
    const auto& t = again.at(off);
    EXPECT_EQ(t.lemmas, s.lemmas);
    EXPECT_EQ(t.hypernyms, s.hypernyms);
  }
  EXPECT_EQ(again.index(), lex.index());
  EXPECT_EQ(again.exceptions(), lex.exceptions());
}

TEST(WordnetParse, MiniDatabaseRoundTrip) {
  const auto& lex = charstory::testing::mini_lexicon();
  TempDir dir;
  wn::write_database(lex, dir.path());
  auto again = wn::parse_database(dir.path());
  ASSERT_EQ(again.synsets().size(), lex.synsets().size());
  for (const auto& [off, s] : lex.synsets()) EXPECT_EQ(again.at(off).hypernyms, s.hypernyms) << off;
  EXPECT_EQ(again.index(), lex.index());
}

TEST(WordnetClosure, ChainAndRoot) {
  auto lex = fixture_lexicon();
  EXPECT_TRUE(wn::hypernym_closure(lex, 1).empty());
  EXPECT_EQ(wn::hypernym_closure(lex, 3), (std::set<wn::SynsetOffset>{1, 2}));
  EXPECT_EQ(wn::hypernym_closure(lex, 5), (std::set<wn::SynsetOffset>{1, 2, 4}));
  EXPECT_THROW(wn::hypernym_closure(lex, 42), charstory::UnknownSynset);
}

TEST(WordnetClosure, DogReachesAnimal) {
  const auto& lex = charstory::testing::mini_lexicon();
  // dog.n.01 and animal.n.01 offsets in WordNet 3.0, read off data.noun
  EXPECT_EQ(lex.senses("dog").front(), 2084071u);
  EXPECT_EQ(lex.animal_root(), 15388u);
  EXPECT_EQ(lex.person_root(), 7846u);
  EXPECT_TRUE(wn::hypernym_closure(lex, 2084071).count(15388));
}

TEST(WordnetClosure, IdempotentAndMonotoneOnMini) {
  const auto& lex = charstory::testing::mini_lexicon();
  for (const auto& [off, s] : lex.synsets()) {
    auto c = wn::hypernym_closure(lex, off);
    EXPECT_FALSE(c.count(off));
    for (auto b : c) {
      auto cb = wn::hypernym_closure(lex, b);
      EXPECT_TRUE(std::includes(c.begin(), c.end(), cb.begin(), cb.end())) << off << " via " << b;
    }
  }
}

TEST(WordnetMorphy, Examples) {
  const auto& lex = charstory::testing::mini_lexicon();
  EXPECT_EQ(wn::morphy(lex, "dogs"), std::vector<std::string>{"dog"});
  EXPECT_EQ(wn::morphy(lex, "dog"), std::vector<std::string>{"dog"});
  EXPECT_EQ(wn::morphy(lex, "Dogs"), std::vector<std::string>{"dog"});
  EXPECT_TRUE(wn::morphy(lex, "webxites").empty());
  EXPECT_TRUE(wn::morphy(lex, "sing-a-long").empty());
}

TEST(WordnetMorphy, ExceptionListComesFirst) {
  auto lex = fixture_lexicon();
  EXPECT_EQ(wn::morphy(lex, "people"), std::vector<std::string>{"person"});
  EXPECT_EQ(wn::morphy(lex, "persons"), std::vector<std::string>{"person"});
}

TEST(WordnetMorphy, NeverReturnsFormsOutsideTheIndex) {
  const auto& lex = charstory::testing::mini_lexicon();
  auto doc = charstory::testing::load_json(charstory::testing::fixture_path("classify_mini.json"));
  for (const auto& row : doc["words"]) {
    auto word = row["word"].get<std::string>();
    for (const auto& base : wn::morphy(lex, word)) EXPECT_TRUE(lex.contains(base)) << word;
  }
}

TEST(WordnetClassify, Examples) {
  const auto& lex = charstory::testing::mini_lexicon();
  EXPECT_EQ(wn::classify_character(lex, "father"), CharacterKind::Person);
  EXPECT_EQ(wn::classify_character(lex, "dolphins"), CharacterKind::Animal);
  EXPECT_EQ(wn::classify_character(lex, "table"), CharacterKind::NotACharacter);
  EXPECT_THROW(wn::classify_character(lex, "geez"), charstory::NotInLexicon);
  EXPECT_THROW(wn::classify_character(lex, ""), charstory::PreconditionError);
}

TEST(WordnetClassify, SensePolicies) {
  const auto& lex = charstory::testing::mini_lexicon();
  // first senses are not characters, later senses are
  for (const char* w : {"waves", "party", "end"}) {
    EXPECT_EQ(wn::classify_character(lex, w), CharacterKind::NotACharacter) << w;
    EXPECT_EQ(wn::classify_character(lex, w, wn::SensePolicy::AnySense), CharacterKind::Person) << w;
  }
  EXPECT_EQ(wn::classify_character(lex, "coral", wn::SensePolicy::AnySense), CharacterKind::Animal);
}

TEST(WordnetClassify, PersonWinsOverAnimal) {
  TempDir dir;
  std::string data = kData;
  data += "00000006 03 n 01 centaur 0 002 @ 00000003 n 0000 @ 00000004 n 0000 | both\n";
  std::string index = kIndex;
  index += "centaur n 1 1 @ 1 0 00000006\n";
  write_db(dir, data, index);
  auto lex = wn::parse_database(dir.path());
  EXPECT_EQ(wn::classify_character(lex, "centaur"), CharacterKind::Person);
  EXPECT_EQ(wn::classify_character(lex, "fido"), CharacterKind::Animal);
  EXPECT_EQ(wn::classify_character(lex, "person"), CharacterKind::Person);
  EXPECT_EQ(wn::classify_character(lex, "organism"), CharacterKind::NotACharacter);
}

TEST(WordnetClassify, MatchesIndependentReaderOnMini) {
  const auto& lex = charstory::testing::mini_lexicon();
  auto doc = charstory::testing::load_json(charstory::testing::fixture_path("classify_mini.json"));
  EXPECT_EQ(lex.synsets().size(), doc["synsets"].get<std::size_t>());
  for (const auto& row : doc["words"]) {
    auto word = row["word"].get<std::string>();
    EXPECT_EQ(wn::morphy(lex, word), row["morphy"].get<std::vector<std::string>>()) << word;
    auto first = row["first"].get<std::string>();
    if (first == "NotInLexicon") {
      EXPECT_THROW(wn::classify_character(lex, word), charstory::NotInLexicon) << word;
      continue;
    }
    EXPECT_EQ(wn::classify_character(lex, word), kind_from(first)) << word;
    EXPECT_EQ(wn::classify_character(lex, word, wn::SensePolicy::AnySense), kind_from(row["any"])) << word;
    auto c = wn::try_classify(lex, word);
    EXPECT_EQ(wn::hypernym_closure(lex, c->sense).size(), row["closure_size"].get<std::size_t>()) << word;
  }
}

TEST(WordnetClassify, ReportedRootLiesInTheInspectedClosure) {
  const auto& lex = charstory::testing::mini_lexicon();
  for (const auto& [lemma, senses] : lex.index()) {
    for (auto policy : {wn::SensePolicy::FirstSense, wn::SensePolicy::AnySense}) {
      auto c = wn::try_classify(lex, lemma, policy);
      ASSERT_TRUE(c);
      if (c->kind == CharacterKind::NotACharacter) continue;
      auto closure = wn::hypernym_closure(lex, c->sense);
      closure.insert(c->sense);
      auto root = c->kind == CharacterKind::Person ? lex.person_root() : lex.animal_root();
      EXPECT_TRUE(closure.count(root)) << lemma;
    }
  }
}

TEST(WordnetFull, SynsetCountMatchesDataRecords) {
  auto dir = charstory::testing::full_wordnet();
  if (!dir) GTEST_SKIP() << "full WordNet 3.0 not available (set WNHOME)";
  auto lex = wn::parse_database(*dir);
  // non-license lines of the 3.0 data.noun, counted by a line scanner
  EXPECT_EQ(lex.synsets().size(), 82115u);
  auto doc = charstory::testing::load_json(charstory::testing::fixture_path("classify_full.json"));
  EXPECT_EQ(lex.synsets().size(), doc["synsets"].get<std::size_t>());
  EXPECT_EQ(lex.person_root(), doc["person_root"].get<wn::SynsetOffset>());
  EXPECT_EQ(lex.animal_root(), doc["animal_root"].get<wn::SynsetOffset>());
  for (const auto& row : doc["words"]) {
    auto word = row["word"].get<std::string>();
    EXPECT_EQ(wn::morphy(lex, word), row["morphy"].get<std::vector<std::string>>()) << word;
    auto first = row["first"].get<std::string>();
    if (first == "NotInLexicon") {
      EXPECT_FALSE(wn::try_classify(lex, word)) << word;
      continue;
    }
    EXPECT_EQ(wn::classify_character(lex, word), kind_from(first)) << word;
    EXPECT_EQ(wn::classify_character(lex, word, wn::SensePolicy::AnySense), kind_from(row["any"])) << word;
  }
  EXPECT_EQ(wn::classify_character(lex, "father"), CharacterKind::Person);
  EXPECT_EQ(wn::classify_character(lex, "dolphins"), CharacterKind::Animal);
  EXPECT_EQ(wn::classify_character(lex, "table"), CharacterKind::NotACharacter);
  EXPECT_THROW(wn::classify_character(lex, "geez"), charstory::NotInLexicon);
}
