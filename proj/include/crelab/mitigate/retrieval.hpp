#pragma once

#include "crelab/mitigate/generator.hpp"
#include "crelab/mitigate/templates.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace crelab::mitigate {

struct Document {
  std::string id;
  std::string text;
  std::string source;

  bool operator==(const Document&) const = default;
};

struct SparseVector {
  std::vector<std::uint32_t> index;  // ascending
  std::vector<double> value;
};

/// Lowercase alphanumeric runs.
std::vector<std::string> tokenize_terms(std::string_view text);

/// TF-IDF index: raw term counts times smooth idf ln((1+N)/(1+df)) + 1,
/// L2-normalized. Vocabulary dimensions follow lexicographic term order.
class RetrievalIndex {
 public:
  /// Throws InputError on an empty corpus, a duplicate id or a document with
  /// no terms.
  static RetrievalIndex build(std::vector<Document> documents);

  const std::vector<Document>& documents() const { return docs_; }
  const std::map<std::string, std::uint32_t>& vocabulary() const { return vocab_; }
  const std::vector<double>& idf() const { return idf_; }
  const std::vector<SparseVector>& vectors() const { return vectors_; }

  /// Normalized query vector; empty when no term is in the vocabulary.
  SparseVector vectorize(std::string_view text) const;

 private:
  std::vector<Document> docs_;
  std::map<std::string, std::uint32_t> vocab_;
  std::vector<double> idf_;
  std::vector<SparseVector> vectors_;
};

double sparse_dot(const SparseVector& a, const SparseVector& b);

struct RetrievalHit {
  std::string doc_id;
  double score = 0.0;
  std::size_t doc_index = 0;
};

struct RetrievalResult {
  std::vector<RetrievalHit> hits;
  bool no_vocabulary_match = false;
};

/// Top min(k, N) documents by cosine, descending, ties by doc id ascending.
RetrievalResult retrieve(const RetrievalIndex& index, std::string_view query, std::size_t k = 3);

/// A directory of .txt files (id = file stem, source = file name) or a
/// JSON-lines file with {id, text, source}.
std::vector<Document> load_corpus(const std::string& path);

/// "[1] <id> (<source>)\n<text>\n\n..." or the no-context notice.
std::string render_context(const RetrievalIndex& index, const RetrievalResult& result);

inline constexpr const char* kNoContextBlock = "No context found for this task.";

struct RagOutput {
  std::string text;
  std::string prompt;
  RetrievalResult retrieval;
};

/// k = 0 sends the plain problem prompt; otherwise the rendered context block
/// is prepended via the rag template. One generator call.
RagOutput rag_generate(std::string_view problem, const RetrievalIndex& index, Generator& generator,
                       const TemplateSet& templates, std::size_t k, const GenerationRequest& base);

}  // namespace crelab::mitigate
