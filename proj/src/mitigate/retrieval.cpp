#include "crelab/mitigate/retrieval.hpp"

#include "crelab/common/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace crelab::mitigate {

namespace {

std::map<std::string, int> term_counts(std::string_view text) {
  std::map<std::string, int> counts;
  for (auto& t : tokenize_terms(text)) ++counts[std::move(t)];
  return counts;
}

void normalize(SparseVector& v) {
  double sq = 0.0;
  for (double x : v.value) sq += x * x;
  const double norm = std::sqrt(sq);
  for (double& x : v.value) x /= norm;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<std::string> tokenize_terms(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

RetrievalIndex RetrievalIndex::build(std::vector<Document> documents) {
  if (documents.empty()) throw InputError("cannot index an empty corpus");
  RetrievalIndex ix;
  std::set<std::string> ids;
  std::vector<std::map<std::string, int>> counts;
  counts.reserve(documents.size());
  for (const auto& d : documents) {
    if (!ids.insert(d.id).second) throw InputError("duplicate document id '" + d.id + "'");
    counts.push_back(term_counts(d.text));
    if (counts.back().empty()) throw InputError("document '" + d.id + "' has no terms");
    for (const auto& [term, n] : counts.back()) ix.vocab_.emplace(term, 0);
  }
  std::uint32_t dim = 0;
  for (auto& [term, slot] : ix.vocab_) slot = dim++;

  std::vector<std::size_t> df(ix.vocab_.size(), 0);
  for (const auto& c : counts) {
    for (const auto& [term, n] : c) ++df[ix.vocab_.at(term)];
  }
  const double n_docs = static_cast<double>(documents.size());
  ix.idf_.resize(df.size());
  for (std::size_t i = 0; i < df.size(); ++i) {
    ix.idf_[i] = std::log((1.0 + n_docs) / (1.0 + static_cast<double>(df[i]))) + 1.0;
  }

  ix.vectors_.reserve(counts.size());
  for (const auto& c : counts) {
    SparseVector v;
    for (const auto& [term, n] : c) {
      const auto d = ix.vocab_.at(term);
      v.index.push_back(d);
      v.value.push_back(static_cast<double>(n) * ix.idf_[d]);
    }
    normalize(v);
    ix.vectors_.push_back(std::move(v));
  }
  ix.docs_ = std::move(documents);
  return ix;
}

SparseVector RetrievalIndex::vectorize(std::string_view text) const {
  SparseVector v;
  for (const auto& [term, n] : term_counts(text)) {
    const auto it = vocab_.find(term);
    if (it == vocab_.end()) continue;
    v.index.push_back(it->second);
    v.value.push_back(static_cast<double>(n) * idf_[it->second]);
  }
  if (!v.index.empty()) normalize(v);
  return v;
}

double sparse_dot(const SparseVector& a, const SparseVector& b) {
  double sum = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.index.size() && j < b.index.size()) {
    if (a.index[i] < b.index[j]) {
      ++i;
    } else if (b.index[j] < a.index[i]) {
      ++j;
    } else {
      sum += a.value[i++] * b.value[j++];
    }
  }
  return sum;
}

RetrievalResult retrieve(const RetrievalIndex& index, std::string_view query, std::size_t k) {
  if (k == 0) throw ConfigError("retrieve needs k >= 1");
  RetrievalResult out;
  const SparseVector q = index.vectorize(query);
  if (q.index.empty()) {
    out.no_vocabulary_match = true;
    return out;
  }
  const auto& docs = index.documents();
  std::vector<double> scores(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) scores[i] = sparse_dot(q, index.vectors()[i]);
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return docs[a].id < docs[b].id;
  });
  order.resize(std::min(k, order.size()));
  for (std::size_t i : order) out.hits.push_back({docs[i].id, scores[i], i});
  return out;
}

std::vector<Document> load_corpus(const std::string& path) {
  namespace fs = std::filesystem;
  std::vector<Document> docs;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      docs.push_back({f.stem().string(), read_file(f), f.filename().string()});
    }
    if (docs.empty()) throw InputError("no .txt documents in '" + path + "'");
    return docs;
  }
  if (!fs::exists(path)) throw IoError("corpus '" + path + "' does not exist");
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw LoadError(line_no, "not a JSON object");
    if (!j.contains("id") || !j["id"].is_string()) throw LoadError(line_no, "missing string id");
    if (!j.contains("text") || !j["text"].is_string()) {
      throw LoadError(line_no, "missing string text");
    }
    Document d{j["id"].get<std::string>(), j["text"].get<std::string>(), ""};
    if (j.contains("source")) {
      if (!j["source"].is_string()) throw LoadError(line_no, "source must be a string");
      d.source = j["source"].get<std::string>();
    }
    docs.push_back(std::move(d));
  }
  if (docs.empty()) throw InputError("corpus '" + path + "' is empty");
  return docs;
}

std::string render_context(const RetrievalIndex& index, const RetrievalResult& result) {
  if (result.hits.empty()) return kNoContextBlock;
  std::string out;
  for (std::size_t r = 0; r < result.hits.size(); ++r) {
    const auto& d = index.documents()[result.hits[r].doc_index];
    if (r) out += "\n";
    out += "[" + std::to_string(r + 1) + "] " + d.id;
    if (!d.source.empty()) out += " (" + d.source + ")";
    out += "\n" + d.text;
    if (d.text.empty() || d.text.back() != '\n') out += "\n";
  }
  return out;
}

RagOutput rag_generate(std::string_view problem, const RetrievalIndex& index, Generator& generator,
                       const TemplateSet& templates, std::size_t k, const GenerationRequest& base) {
  RagOutput out;
  GenerationRequest req = base;
  if (k == 0) {
    out.prompt = std::string(problem);
  } else {
    out.retrieval = retrieve(index, problem, k);
    out.prompt = templates.rag.render(
        {{"context", render_context(index, out.retrieval)}, {"problem", std::string(problem)}});
    req.purpose = Purpose::rag;
  }
  req.prompt = out.prompt;
  out.text = generator.complete(req);
  return out;
}

}  // namespace crelab::mitigate
