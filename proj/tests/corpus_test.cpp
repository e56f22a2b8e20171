#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "support.hpp"
#include "uicws/corpus.hpp"

using namespace uicws;
using uicws::oracle::U;

namespace {

const std::string kFixture = std::string(UICWS_TEST_DATA) + "/fixture10.conll";

std::vector<Sentence> parse(const std::string& text, ConllOptions opts = {}) {
  std::istringstream in(text);
  return parse_conll(in, opts);
}

}  // namespace

TEST(Conll, ParsesTwoLineBlock) {
  const auto s = parse("南\tB-LOC\n京\tE-LOC\n");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].chars, U"南京");
  EXPECT_EQ(s[0].spans, (std::vector<Span>{{0, 2, "LOC"}}));
}

TEST(Conll, SpaceSeparatedColumnsAndCrlf) {
  const auto s = parse("南 B-LOC\r\n京 E-LOC\r\n\r\n我 O\r\n");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].tags, (std::vector<std::string>{"O"}));
}

TEST(Conll, IllegalSequenceReportsLine) {
  try {
    parse("我\tO\n\n京\tI-LOC\n");
    FAIL();
  } catch (const IllegalTagSequence& e) {
    EXPECT_EQ(e.sentence_index(), 1u);
    EXPECT_EQ(e.position(), 0u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Conll, MalformedLinesAreParseErrors) {
  const auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("南\tB-LOC\n京京\tE-LOC\n"), 2u);  // two characters
  EXPECT_EQ(line_of("南\tZ-LOC\n"), 1u);              // unknown tag
  EXPECT_EQ(line_of("我\tO\n南\n"), 2u);                // missing tag
}

TEST(Conll, UntaggedInputWhenAllowed) {
  ConllOptions opts;
  opts.allow_untagged = true;
  const auto s = parse("南\n京\n", opts);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_TRUE(s[0].tags.empty());
  EXPECT_THROW(parse("南\n京\tO\n", opts), ParseError);
}

TEST(Conll, BioInputIsConverted) {
  ConllOptions opts;
  opts.bio_input = true;
  const auto s = parse("南\tB-LOC\n京\tI-LOC\n市\tI-LOC\n的\tO\n人\tB-PER\n", opts);
  EXPECT_EQ(s[0].tags, (std::vector<std::string>{"B-LOC", "I-LOC", "E-LOC", "O", "S-PER"}));
  EXPECT_THROW(parse("南\tE-LOC\n", opts), ParseError);
}

TEST(Conll, FixtureMatchesHandManifest) {
  const auto s = parse_conll(kFixture);
  ASSERT_EQ(s.size(), 10u);
  std::vector<std::size_t> lengths;
  std::multiset<std::string> types;
  std::size_t spans = 0;
  for (const auto& x : s) {
    lengths.push_back(x.size());
    spans += x.spans.size();
    for (const auto& sp : x.spans) types.insert(sp.type);
  }
  EXPECT_EQ(lengths, (std::vector<std::size_t>{5, 6, 2, 7, 4, 2, 6, 6, 5, 4}));
  EXPECT_EQ(spans, 14u);
  EXPECT_EQ(types.count("PER"), 6u);
  EXPECT_EQ(types.count("LOC"), 6u);
  EXPECT_EQ(types.count("ORG"), 2u);
  EXPECT_EQ(s[3].spans, (std::vector<Span>{{0, 4, "ORG"}, {5, 7, "LOC"}}));
  ConllOptions pred;
  pred.tag_column = 2;
  EXPECT_EQ(parse_conll(kFixture, pred)[9].spans, (std::vector<Span>{{0, 4, "PER"}}));
}

TEST(Conll, WriteThenParseRoundTrips) {
  const auto s = parse_conll(kFixture);
  std::ostringstream out;
  write_conll(out, s);
  std::istringstream in(out.str());
  EXPECT_EQ(parse_conll(in), s);
}

TEST(Conll, MissingFileNamesPath) {
  try {
    parse_conll(std::string("/no/such/corpus.conll"));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/no/such/corpus.conll"), std::string::npos);
  }
}

TEST(Conll, SchemeFromCorpusIsSorted) {
  EXPECT_EQ(scheme_from(parse_conll(kFixture)).entity_types(), (std::vector<std::string>{"LOC", "ORG", "PER"}));
}

TEST(Embeddings, HeaderAndRows) {
  std::istringstream in("2 4\n南 0.1 0.2 0.3 0.4\n京 1 2 3 4\n");
  const auto t = load_embeddings(in, 4);
  EXPECT_EQ(t.vectors.size(), 2u);
  EXPECT_EQ(t.lookup(U'京'), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(t.pad, (std::vector<double>(4, 0.0)));
  EXPECT_EQ(t.lookup(U'市'), t.unk);
  EXPECT_NE(t.unk, t.pad);
  for (double v : t.unk) EXPECT_LE(std::abs(v), 0.1);
}

TEST(Embeddings, DimensionMismatch) {
  std::istringstream header("2 4\n南 0.1 0.2 0.3 0.4\n京 1 2 3 4\n");
  EXPECT_THROW(load_embeddings(header, 100), DimMismatch);
  std::istringstream row("南 0.1 0.2 0.3\n");
  try {
    load_embeddings(row, 4);
    FAIL();
  } catch (const DimMismatch& e) {
    EXPECT_EQ(e.found(), 3u);
    EXPECT_EQ(e.expected(), 4u);
  }
}

TEST(Embeddings, MalformedNumber) {
  std::istringstream in("南 0.1 0.2\n京 1 x\n");
  try {
    load_embeddings(in, 2);
    FAIL();
  } catch (const MalformedLine& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Vocabulary, PadAndUnkReserved) {
  const auto v = Vocabulary::from_corpus(parse_conll(kFixture));
  EXPECT_EQ(v.id(U'é'), Vocabulary::kUnk);
  EXPECT_GE(v.id(U'张'), 2u);
  EXPECT_EQ(v.encode(U"张x"), (std::vector<std::size_t>{v.id(U'张'), Vocabulary::kUnk}));
}

TEST(Batches, PartitionSizes) {
  std::vector<Sentence> s;
  for (int i = 0; i < 5; ++i) s.push_back(make_sentence(U"南京" + std::u32string(i, U'市'), {{0, 2, "LOC"}}));
  const auto scheme = scheme_from(s);
  const auto vocab = Vocabulary::from_corpus(s);
  const auto lex = Lexicon::build(std::vector<std::string>{"南京"});
  const auto batches = make_batches(s, lex, scheme, vocab, 2, std::nullopt);
  std::vector<std::size_t> sizes, seen;
  for (const auto& b : batches) {
    sizes.push_back(b.batch_size);
    seen.insert(seen.end(), b.sentence_index.begin(), b.sentence_index.end());
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{2, 2, 1}));
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_THROW(make_batches(s, lex, scheme, vocab, 0, std::nullopt), ConfigError);
}

TEST(Batches, PaddingCellsAreInert) {
  const auto s = parse_conll(kFixture);
  const auto batches = make_batches(s, Lexicon::build(std::vector<std::string>{"北京", "长江大桥"}), scheme_from(s),
                                    Vocabulary::from_corpus(s), 4, std::nullopt);
  for (const auto& b : batches)
    for (std::size_t k = 0; k < b.batch_size; ++k)
      for (std::size_t j = 0; j < b.max_len; ++j) {
        const auto cell = b.at(k, j);
        EXPECT_EQ(b.mask[cell] == 1, j < b.lengths[k]);
        if (j >= b.lengths[k]) {
          EXPECT_EQ(b.char_ids[cell], Vocabulary::kPad);
          EXPECT_EQ(b.tag_ids[cell], Batch::kIgnoreTag);
          EXPECT_EQ(b.cand_pos[cell], (std::array<std::uint8_t, 4>{0, 0, 0, 0}));
        }
      }
}

TEST(BatchProperties, SameSeedSameOrderAndContentPreserved) {
  std::mt19937_64 rng(1);
  std::vector<Sentence> s;
  for (int i = 0; i < 23; ++i) s.push_back(make_sentence(oracle::random_string(rng, 1 + i % 9, 6), {}));
  const TagScheme scheme;
  const auto vocab = Vocabulary::from_corpus(s);
  const auto lex = Lexicon::build(oracle::random_words(rng, 10, 6));
  const auto a = make_batches(s, lex, scheme, vocab, 4, 99);
  const auto b = make_batches(s, lex, scheme, vocab, 4, 99);
  ASSERT_EQ(a.size(), b.size());
  std::vector<std::vector<std::size_t>> rebuilt(s.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].sentence_index, b[i].sentence_index);
    for (std::size_t k = 0; k < a[i].batch_size; ++k)
      for (std::size_t j = 0; j < a[i].max_len; ++j)
        if (a[i].mask[a[i].at(k, j)]) rebuilt[a[i].sentence_index[k]].push_back(a[i].char_ids[a[i].at(k, j)]);
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(rebuilt[i], vocab.encode(s[i].chars));
  }
  const auto c = make_batches(s, lex, scheme, vocab, 4, 100);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs = differs || a[i].sentence_index != c[i].sentence_index;
  EXPECT_TRUE(differs);
}

TEST(Split, DeterministicAndDisjoint) {
  const auto a = validation_indices(100, 0.2, 7);
  EXPECT_EQ(a.size(), 20u);
  EXPECT_EQ(a, validation_indices(100, 0.2, 7));
  EXPECT_NE(a, validation_indices(100, 0.2, 8));
  std::vector<Sentence> corpus;
  for (int i = 0; i < 10; ++i) corpus.push_back(make_sentence(std::u32string(1 + i, U'a'), {}));
  const auto split = split_corpus(corpus, 0.3, 1);
  EXPECT_EQ(split.val.size(), 3u);
  EXPECT_EQ(split.train.size(), 7u);
  for (std::size_t k = 0; k < split.val.size(); ++k) EXPECT_EQ(split.val[k], corpus[split.val_indices[k]]);
  EXPECT_THROW(validation_indices(10, 1.0, 1), ConfigError);
}
