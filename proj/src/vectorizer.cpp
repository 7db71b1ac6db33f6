#include "newsrec/vectorizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "newsrec/textio.hpp"
#include "newsrec/vecmath.hpp"

namespace newsrec {

namespace {

double smoothed_idf(std::uint64_t doc_count, std::uint64_t df) {
  return std::log((1.0 + static_cast<double>(doc_count)) / (1.0 + static_cast<double>(df))) + 1.0;
}

}  // namespace

EmbeddingTable EmbeddingTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding table: " + path);
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    if (token == "DIM" && table.entries.empty() && table.dim == 0) {
      std::size_t d = 0;
      if (!(ss >> d) || d < 2)
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad DIM line");
      table.dim = d;
      continue;
    }
    Vec v;
    double x;
    while (ss >> x) v.push_back(x);
    if (v.empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": no vector components");
    if (table.dim == 0) table.dim = v.size();
    if (v.size() != table.dim)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": dimension mismatch");
    table.entries.emplace(std::move(token), std::move(v));
  }
  if (table.dim < 2) throw std::runtime_error("embedding table dimension must be >= 2");
  return table;
}

void EmbeddingTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write embedding table: " + path);
  out << "DIM " << dim << "\n";
  std::vector<const std::string*> tokens;
  tokens.reserve(entries.size());
  for (const auto& [tok, _] : entries) tokens.push_back(&tok);
  std::sort(tokens.begin(), tokens.end(), [](auto* a, auto* b) { return *a < *b; });
  for (const auto* tok : tokens) {
    out << *tok;
    for (double x : entries.at(*tok)) out << ' ' << fmt_double(x);
    out << '\n';
  }
}

double IdfTable::lookup(const std::string& token) const {
  auto it = entries.find(token);
  if (it != entries.end()) return it->second;
  return smoothed_idf(doc_count, 0);
}

IdfTable IdfTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open idf table: " + path);
  IdfTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    if (!have_header && token == "DOCS") {
      ss >> table.doc_count;
      have_header = true;
      continue;
    }
    double v = 0.0;
    if (!(ss >> v)) throw std::runtime_error("bad idf line: " + line);
    table.entries.emplace(std::move(token), v);
  }
  return table;
}

void IdfTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write idf table: " + path);
  out << "DOCS " << doc_count << "\n";
  std::vector<const std::string*> tokens;
  tokens.reserve(entries.size());
  for (const auto& [tok, _] : entries) tokens.push_back(&tok);
  std::sort(tokens.begin(), tokens.end(), [](auto* a, auto* b) { return *a < *b; });
  for (const auto* tok : tokens) out << *tok << ' ' << fmt_double(entries.at(*tok)) << '\n';
}

IdfTable build_idf(const std::vector<std::vector<std::string>>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  std::unordered_map<std::string, std::uint64_t> df;
  std::unordered_set<std::string> seen;
  for (const auto& doc : corpus) {
    seen.clear();
    for (const auto& tok : doc) {
      if (seen.insert(tok).second) ++df[tok];
    }
  }
  IdfTable table;
  table.doc_count = corpus.size();
  table.entries.reserve(df.size());
  for (const auto& [tok, n] : df) table.entries.emplace(tok, smoothed_idf(table.doc_count, n));
  return table;
}

std::optional<Vec> article_vector(const std::vector<std::string>& tokens,
                                  const EmbeddingTable& emb, const IdfTable& idf,
                                  bool count_duplicates) {
  if (emb.dim == 0) return std::nullopt;
  Vec sum(emb.dim, 0.0);
  bool any = false;
  std::unordered_set<std::string> used;
  for (const auto& tok : tokens) {
    if (!count_duplicates && !used.insert(tok).second) continue;
    const Vec* w = emb.find(tok);
    if (!w) continue;
    double weight = idf.lookup(tok);
    if (weight <= 0.0) continue;
    add_into(sum, *w, weight);
    any = true;
  }
  if (!any) return std::nullopt;
  return normalized(sum);
}

std::optional<Vec> user_vector(const std::vector<const Vec*>& history_vectors) {
  if (history_vectors.empty()) return std::nullopt;
  Vec sum(history_vectors.front()->size(), 0.0);
  for (const Vec* v : history_vectors) add_into(sum, *v);
  return normalized(sum);
}

}  // namespace newsrec
