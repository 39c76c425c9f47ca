#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "justgen/bm25.hpp"
#include "justgen/corpus.hpp"
#include "justgen/encoder.hpp"
#include "justgen/errors.hpp"
#include "justgen/index.hpp"
#include "justgen/model.hpp"
#include "justgen/rng.hpp"
#include "justgen/text.hpp"

using namespace justgen;

namespace {

Model tiny_model() {
  ModelConfig cfg;
  cfg.retriever.dim = 16;
  cfg.retriever.layers = 1;
  cfg.retriever.heads = 2;
  cfg.retriever.ff = 32;
  cfg.retriever.max_len = 16;
  cfg.lm.d_model = 16;
  cfg.lm.enc_layers = 1;
  cfg.lm.dec_layers = 1;
  cfg.lm.heads = 2;
  cfg.lm.ff = 32;
  cfg.lm.max_src_len = 32;
  cfg.lm.max_tgt_len = 16;
  cfg.init_seed = 5;
  return init_model(cfg, {"alpha bravo charlie delta echo foxtrot golf hotel india juliet",
                          "kilo lima mike november oscar papa quebec romeo sierra tango"});
}

Corpus toy_corpus(int n_chunks) {
  Corpus corpus;
  const std::vector<std::string> pool = {"alpha", "bravo", "charlie", "delta", "echo",
                                         "foxtrot", "golf", "hotel", "india", "juliet"};
  Rng rng(31);
  for (int i = 0; i < n_chunks; ++i) {
    Chunk c;
    c.source_doc_id = "doc" + std::to_string(i / 3);
    c.position = i % 3;
    c.chunk_id = c.source_doc_id + "#" + std::to_string(c.position);
    for (int w = 0; w < 6; ++w) {
      if (w) c.text += ' ';
      c.text += pool[rng.uniform(pool.size())];
    }
    corpus.chunks.push_back(std::move(c));
  }
  return corpus;
}

EmbeddingIndex manual_index(const std::vector<std::vector<float>>& rows, const std::vector<std::string>& ids) {
  EmbeddingIndex index;
  index.dim = static_cast<int>(rows[0].size());
  index.chunk_ids = ids;
  for (const auto& r : rows) index.rows.insert(index.rows.end(), r.begin(), r.end());
  return index;
}

}  // namespace

TEST_CASE("query encoding is deterministic, finite, and truncates long inputs") {
  const Model model = tiny_model();
  const Matrix a = encode_query_value(model, "alpha bravo charlie");
  const Matrix b = encode_query_value(model, "alpha bravo charlie");
  REQUIRE(a.rows == 1);
  REQUIRE(a.cols == model.config.retriever.dim);
  CHECK(bitwise_equal(a, b));
  for (double v : a.data) CHECK(std::isfinite(v));

  std::string long_text, head_text;
  for (int i = 0; i < model.config.retriever.max_len + 5; ++i) {
    const std::string w = "alpha";
    long_text += (i ? " " : "") + w;
    if (i < model.config.retriever.max_len) head_text += (i ? " " : "") + w;
  }
  CHECK(bitwise_equal(encode_query_value(model, long_text), encode_query_value(model, head_text)));

  CHECK_THROWS_AS(encode_query_value(model, "   "), Error);
}

TEST_CASE("document and query encoders start out as identical copies") {
  const Model model = tiny_model();
  // init copies the query stack into the document stack, so both encoders
  // map the same text to the same embedding until training separates them.
  CHECK(bitwise_equal(encode_query_value(model, "alpha bravo"), encode_document_value(model, "alpha bravo")));
}

TEST_CASE("build_index embeds every chunk in corpus order") {
  const Model model = tiny_model();
  const Corpus corpus = toy_corpus(9);
  const EmbeddingIndex index = build_index(corpus, model);
  REQUIRE(index.count() == corpus.chunks.size());
  CHECK(index.dim == model.config.retriever.dim);
  for (size_t i = 0; i < index.count(); ++i) {
    CHECK(index.chunk_ids[i] == corpus.chunks[i].chunk_id);
    const Matrix expect = encode_document_value(model, corpus.chunks[i].text);
    for (int d = 0; d < index.dim; ++d) {
      CHECK(index.row(i)[d] == static_cast<float>(expect.at(0, d)));
    }
  }

  const EmbeddingIndex again = build_index(corpus, model);
  CHECK(again.rows == index.rows);

  CHECK_THROWS_AS(build_index(Corpus{}, model), Error);
}

TEST_CASE("retrieve ranks by inner product with deterministic ties") {
  const EmbeddingIndex index =
      manual_index({{1.0f, 0.0f}, {0.0f, 1.0f}, {0.6f, 0.8f}}, {"e1", "e2", "e3"});
  Matrix query(1, 2);
  query.at(0, 0) = 1.0;
  query.at(0, 1) = 0.0;

  const RetrievedSet top = retrieve(index, query, 2);
  REQUIRE(top.size() == 2);
  CHECK(top.chunk_ids[0] == "e1");
  CHECK(top.scores[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(top.chunk_ids[1] == "e3");
  CHECK(top.scores[1] == doctest::Approx(0.6).epsilon(1e-6));  // rows are stored as f32
  CHECK(top.row_indices[0] == 0);
  CHECK(top.row_indices[1] == 2);

  SUBCASE("bounds on n") {
    CHECK_THROWS_AS(retrieve(index, query, 4), Error);
    CHECK_THROWS_AS(retrieve(index, query, 0), Error);
    try {
      retrieve(index, query, 4);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NTooLarge);
    }
  }

  SUBCASE("equal scores order by ascending chunk id") {
    const EmbeddingIndex tied = manual_index({{1.0f, 0.0f}, {1.0f, 0.0f}, {1.0f, 0.0f}}, {"b", "a", "c"});
    const RetrievedSet all = retrieve(tied, query, 3);
    CHECK(all.chunk_ids == std::vector<std::string>{"a", "b", "c"});
  }

  SUBCASE("query dimension is checked") {
    Matrix bad(1, 3);
    CHECK_THROWS_AS(retrieve(index, bad, 1), Error);
  }
}

TEST_CASE("retrieve agrees with a brute-force oracle on random instances") {
  Rng rng(97);
  for (int trial = 0; trial < 40; ++trial) {
    const int dim = 2 + static_cast<int>(rng.uniform(9));
    const size_t count = 5 + rng.uniform(60);
    EmbeddingIndex index;
    index.dim = dim;
    for (size_t i = 0; i < count; ++i) {
      index.chunk_ids.push_back("c" + std::to_string(rng.uniform(1000)) + "_" + std::to_string(i));
      for (int d = 0; d < dim; ++d) index.rows.push_back(static_cast<float>(rng.normal()));
    }
    Matrix query(1, dim);
    for (double& v : query.data) v = rng.normal();
    const int n = 1 + static_cast<int>(rng.uniform(count));

    std::vector<std::pair<double, std::string>> expected;
    for (size_t i = 0; i < count; ++i) {
      double s = 0.0;
      for (int d = 0; d < dim; ++d) s += static_cast<double>(index.row(i)[d]) * query.at(0, d);
      expected.push_back({s, index.chunk_ids[i]});
    }
    std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });

    const RetrievedSet got = retrieve(index, query, n);
    REQUIRE(got.size() == static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      CHECK(got.chunk_ids[i] == expected[static_cast<size_t>(i)].second);
      CHECK(got.scores[i] == doctest::Approx(expected[static_cast<size_t>(i)].first).epsilon(1e-9));
    }
  }
}

TEST_CASE("index save/load round trip is exact") {
  const Model model = tiny_model();
  const Corpus corpus = toy_corpus(7);
  const EmbeddingIndex index = build_index(corpus, model);
  const auto dir = std::filesystem::temp_directory_path() / "justgen_index_test";
  std::filesystem::remove_all(dir);
  save_index(index, dir.string());
  const EmbeddingIndex loaded = load_index(dir.string());
  CHECK(loaded.dim == index.dim);
  CHECK(loaded.chunk_ids == index.chunk_ids);
  CHECK(loaded.rows == index.rows);
}

TEST_CASE("article embedding is the mean of per-chunk query embeddings") {
  const Model model = tiny_model();
  const std::vector<std::string> chunks = {"alpha bravo charlie", "delta echo", "foxtrot golf hotel india"};

  ad::Tape tape;
  const ad::Var pooled = article_embedding(tape, model, chunks);
  const Matrix got = tape.val(pooled);
  REQUIRE(got.rows == 1);
  REQUIRE(got.cols == model.config.retriever.dim);

  Matrix mean(1, model.config.retriever.dim);
  for (const auto& c : chunks) {
    const Matrix e = encode_query_value(model, c);
    for (int d = 0; d < mean.cols; ++d) mean.at(0, d) += e.at(0, d) / static_cast<double>(chunks.size());
  }
  for (int d = 0; d < mean.cols; ++d) CHECK(got.at(0, d) == doctest::Approx(mean.at(0, d)).epsilon(1e-12));

  SUBCASE("single chunk equals plain encoding") {
    ad::Tape t2;
    const Matrix single = t2.val(article_embedding(t2, model, {"alpha bravo charlie"}));
    CHECK(bitwise_equal(single, encode_query_value(model, "alpha bravo charlie")));
  }
  SUBCASE("permutation invariance up to rounding") {
    ad::Tape t2;
    const Matrix perm = t2.val(article_embedding(t2, model, {"delta echo", "foxtrot golf hotel india",
                                                             "alpha bravo charlie"}));
    for (int d = 0; d < perm.cols; ++d) CHECK(perm.at(0, d) == doctest::Approx(got.at(0, d)).epsilon(1e-12));
  }
}

namespace {

Corpus lexical_corpus() {
  const std::vector<std::string> texts = {
      "the gun lawsuit was dismissed by the court",
      "manufacturers are protected from some lawsuits",
      "the court heard a lawsuit about vaccines",
      "apples and oranges are fruit",
      "the state settled the famous court case last year",
  };
  Corpus corpus;
  for (size_t i = 0; i < texts.size(); ++i) {
    Chunk c;
    c.source_doc_id = "lex" + std::to_string(i);
    c.position = 0;
    c.chunk_id = c.source_doc_id + "#0";
    c.text = texts[i];
    corpus.chunks.push_back(std::move(c));
  }
  return corpus;
}

}  // namespace

TEST_CASE("bm25 scores match hand-derived values") {
  const Bm25Index bm25 = Bm25Index::build(lexical_corpus());
  const std::vector<double> expected = {1.3972638496594427, 0.0, 0.33647223662121289, 0.0, 0.0};
  for (size_t i = 0; i < expected.size(); ++i) {
    CHECK(bm25.score("gun lawsuit", i) == doctest::Approx(expected[i]).epsilon(1e-6));
  }

  const RetrievedSet top = bm25.retrieve("gun lawsuit", 2);
  CHECK(top.chunk_ids[0] == "lex0#0");
  CHECK(top.chunk_ids[1] == "lex2#0");

  SUBCASE("scores are non-negative and zero without shared terms") {
    for (size_t i = 0; i < bm25.count(); ++i) {
      CHECK(bm25.score("zebra quark", i) == 0.0);
      CHECK(bm25.score("the court lawsuit", i) >= 0.0);
    }
  }
  SUBCASE("zero-score fill keeps ascending chunk-id order") {
    const RetrievedSet all = bm25.retrieve("zebra", 5);
    REQUIRE(all.size() == 5);
    CHECK(std::is_sorted(all.chunk_ids.begin(), all.chunk_ids.end()));
  }
  SUBCASE("duplicate texts tie and order by id") {
    Corpus dup = lexical_corpus();
    dup.chunks[3].text = dup.chunks[0].text;  // lex3 now duplicates lex0
    const Bm25Index b2 = Bm25Index::build(dup);
    const RetrievedSet top2 = b2.retrieve("gun lawsuit", 2);
    CHECK(top2.chunk_ids[0] == "lex0#0");
    CHECK(top2.chunk_ids[1] == "lex3#0");
    CHECK(top2.scores[0] == doctest::Approx(top2.scores[1]).epsilon(1e-12));
  }
}
