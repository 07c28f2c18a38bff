#pragma once

// Independent oracles and fixtures shared by the test binaries. The oracles
// use dense loops and textbook formulas on purpose; they must not call the
// library code they check.

#include <Eigen/Dense>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "lexcue/lexcue.hpp"

namespace lexcue::testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("lexcue-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline std::string file_hash(const fs::path& p) { return sha256_file(p); }

// ---------------------------------------------------------------------------
// TF-IDF oracle: idf = ln((1+N)/(1+df)) + 1, raw counts, L2 rows; dense.

struct DenseTfidf {
  std::vector<std::string> vocab;
  std::vector<double> idf;
};

inline DenseTfidf oracle_tfidf_fit(const std::vector<std::vector<std::string>>& docs) {
  std::map<std::string, int> df;
  for (const auto& d : docs) {
    std::set<std::string> seen(d.begin(), d.end());
    for (const auto& t : seen) df[t] += 1;
  }
  DenseTfidf m;
  const double n = static_cast<double>(docs.size());
  for (const auto& [t, c] : df) {
    m.vocab.push_back(t);
    m.idf.push_back(std::log((1.0 + n) / (1.0 + c)) + 1.0);
  }
  return m;
}

inline std::vector<double> oracle_tfidf_row(const DenseTfidf& m, const std::vector<std::string>& doc) {
  std::vector<double> row(m.vocab.size(), 0.0);
  for (std::size_t j = 0; j < m.vocab.size(); ++j) {
    double tf = 0;
    for (const auto& t : doc) tf += t == m.vocab[j];
    row[j] = tf * m.idf[j];
  }
  double ss = 0;
  for (double v : row) ss += v * v;
  if (ss > 0)
    for (double& v : row) v /= std::sqrt(ss);
  return row;
}

// ---------------------------------------------------------------------------
// Logistic regression oracles on dense data.

struct DenseProblem {
  std::vector<std::vector<double>> X;  // n x p
  std::vector<int> y;                  // 0/1
  double lambda = 1.0;

  std::size_t n() const { return X.size(); }
  std::size_t p() const { return X.empty() ? 0 : X[0].size(); }

  std::vector<SparseVector> sparse() const {
    std::vector<SparseVector> out;
    for (const auto& row : X) {
      SparseVector v;
      for (std::size_t j = 0; j < row.size(); ++j)
        if (row[j] != 0.0) {
          v.index.push_back(static_cast<std::uint32_t>(j));
          v.value.push_back(row[j]);
        }
      out.push_back(std::move(v));
    }
    return out;
  }
  std::vector<Label> labels() const {
    std::vector<Label> out;
    for (int v : y) out.push_back(v ? Label::deceptive : Label::genuine);
    return out;
  }
};

/// theta = (intercept, w_1..w_p)
inline double oracle_objective(const DenseProblem& P, const std::vector<double>& theta) {
  double f = 0.0;
  for (std::size_t i = 0; i < P.n(); ++i) {
    double z = theta[0];
    for (std::size_t j = 0; j < P.p(); ++j) z += P.X[i][j] * theta[j + 1];
    // -[y log s + (1-y) log(1-s)] = log(1+e^z) - y z
    f += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - P.y[i] * z;
  }
  for (std::size_t j = 0; j < P.p(); ++j) f += 0.5 * P.lambda * theta[j + 1] * theta[j + 1];
  return f;
}

inline std::vector<double> oracle_gradient(const DenseProblem& P, const std::vector<double>& theta) {
  std::vector<double> g(P.p() + 1, 0.0);
  for (std::size_t i = 0; i < P.n(); ++i) {
    double z = theta[0];
    for (std::size_t j = 0; j < P.p(); ++j) z += P.X[i][j] * theta[j + 1];
    const double r = 1.0 / (1.0 + std::exp(-z)) - P.y[i];
    g[0] += r;
    for (std::size_t j = 0; j < P.p(); ++j) g[j + 1] += r * P.X[i][j];
  }
  for (std::size_t j = 0; j < P.p(); ++j) g[j + 1] += P.lambda * theta[j + 1];
  return g;
}

/// Wald p-values from a Hessian built by central differences of the oracle
/// gradient, inverted densely. Entry 0 is the intercept.
inline std::vector<double> oracle_wald_p(const DenseProblem& P, const std::vector<double>& theta,
                                         double h = 1e-5) {
  const std::size_t d = theta.size();
  Eigen::MatrixXd H(d, d);
  for (std::size_t k = 0; k < d; ++k) {
    auto tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    const auto gp = oracle_gradient(P, tp), gm = oracle_gradient(P, tm);
    for (std::size_t j = 0; j < d; ++j) H(j, k) = (gp[j] - gm[j]) / (2 * h);
  }
  H = 0.5 * (H + H.transpose());
  const Eigen::MatrixXd inv = H.fullPivLu().inverse();
  std::vector<double> p(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double z = theta[j] / std::sqrt(inv(j, j));
    p[j] = std::erfc(std::abs(z) / std::sqrt(2.0));
  }
  return p;
}

inline DenseProblem random_problem(std::mt19937_64& rng, std::size_t n, std::size_t p,
                                   double lambda, double density = 1.0) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  DenseProblem P;
  P.lambda = lambda;
  P.X.assign(n, std::vector<double>(p, 0.0));
  std::vector<double> truth(p);
  for (auto& t : truth) t = nd(rng);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0;
    for (std::size_t j = 0; j < p; ++j) {
      if (ud(rng) < density) P.X[i][j] = nd(rng);
      z += P.X[i][j] * truth[j];
    }
    P.y.push_back(ud(rng) < 1.0 / (1.0 + std::exp(-z)) ? 1 : 0);
  }
  // both labels present
  P.y[0] = 0;
  P.y[1] = 1;
  return P;
}

// ---------------------------------------------------------------------------
// Metrics oracle: enumerates the confusion matrix pair by pair.

struct OracleMetrics {
  double accuracy, precision, recall, f1;
  int tp, fp, tn, fn;
};

inline OracleMetrics oracle_metrics(const std::vector<int>& pred /* -1 abstain */,
                                    const std::vector<int>& gold) {
  OracleMetrics m{};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool gpos = gold[i] == 1;
    if (pred[i] == -1) {
      gpos ? ++m.fn : ++m.fp;
    } else if (pred[i] == 1) {
      gpos ? ++m.tp : ++m.fp;
    } else {
      gpos ? ++m.fn : ++m.tn;
    }
  }
  const double n = static_cast<double>(gold.size());
  m.accuracy = n ? (m.tp + m.tn) / n : 0.0;
  m.precision = m.tp + m.fp ? double(m.tp) / (m.tp + m.fp) : 0.0;
  m.recall = m.tp + m.fn ? double(m.tp) / (m.tp + m.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// Synthetic corpora.

/// Reviews drawn from two overlapping word pools. `leak` appends a token
/// that names the label.
inline std::vector<ReviewRecord> synthetic_reviews(std::size_t per_label, std::uint64_t seed,
                                                   std::size_t length = 40, bool leak = false,
                                                   const std::string& domain = "synthetic",
                                                   std::size_t vocab = 3000,
                                                   std::size_t n_signal = 60,
                                                   double signal_rate = 0.15) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> shared, gen, dec;
  for (std::size_t i = 0; i < vocab; ++i) shared.push_back("w" + std::to_string(i));
  for (std::size_t i = 0; i < n_signal; ++i) gen.push_back("gen" + std::to_string(i));
  for (std::size_t i = 0; i < n_signal; ++i) dec.push_back("dec" + std::to_string(i));
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::vector<ReviewRecord> out;
  for (Label l : kLabels)
    for (std::size_t k = 0; k < per_label; ++k) {
      const auto& own = l == Label::genuine ? gen : dec;
      std::string text;
      for (std::size_t t = 0; t < length; ++t) {
        // skewed draw from the shared pool, or a label-specific word
        const double u = ud(rng);
        std::string w;
        if (u < signal_rate) w = own[static_cast<std::size_t>(ud(rng) * own.size())];
        else w = shared[static_cast<std::size_t>(std::pow(ud(rng), 2.0) * shared.size())];
        text += w + ' ';
      }
      if (leak) text += l == Label::genuine ? "labelgenuine" : "labeldeceptive";
      out.push_back({domain + "-" + std::string(to_string(l)) + "-" + std::to_string(k), text, l,
                     domain, std::nullopt});
    }
  return out;
}

/// Planted phenomena: genuine reviews are sampled from a unigram table A and
/// deceptive ones from table B. The scoring backend routes the genuine
/// phenomenon statement to A and the deceptive one to B, so each phenomenon
/// score is the exact log-likelihood of the review under its distribution.
struct PlantedSetup {
  std::vector<Phenomenon> phenomena;
  std::shared_ptr<const ScoringBackend> backend;
  std::map<std::string, double> table_genuine, table_deceptive;
};

inline PlantedSetup planted_setup() {
  PlantedSetup s;
  const std::vector<std::string> words = {"room", "street", "floor", "walk",  "small", "bed",
                                          "luxury", "amazing", "husband", "experience",
                                          "chicago", "stay"};
  // A favours the first half, B the second half
  double za = 0, zb = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const double a = i < 6 ? 3.0 : 1.0, b = i < 6 ? 1.0 : 3.0;
    s.table_genuine[words[i]] = a;
    s.table_deceptive[words[i]] = b;
    za += a;
    zb += b;
  }
  s.table_genuine[std::string(kUnk)] = 0.5;
  s.table_deceptive[std::string(kUnk)] = 0.5;
  za += 0.5;
  zb += 0.5;
  for (auto& [w, p] : s.table_genuine) p /= za;
  for (auto& [w, p] : s.table_deceptive) p /= zb;
  auto pg = make_phenomenon(Label::genuine, "Genuine reviews dwell on the room layout.",
                            PhenomenonSource::prior_knowledge);
  auto pd = make_phenomenon(Label::deceptive, "Deceptive reviews dwell on luxury and company.",
                            PhenomenonSource::prior_knowledge);
  auto ta = std::make_shared<TableBackend>(s.table_genuine);
  auto tb = std::make_shared<TableBackend>(s.table_deceptive);
  std::map<std::string, double> uni;
  for (auto& [w, p] : s.table_genuine) uni[w] = 1.0 / static_cast<double>(s.table_genuine.size());
  auto fallback = std::make_shared<TableBackend>(uni);
  s.backend = std::make_shared<ConditionedBackend>(
      std::vector<std::pair<std::string, std::shared_ptr<const ScoringBackend>>>{
          {pg.statement, ta}, {pd.statement, tb}},
      fallback);
  s.phenomena = {pg, pd};
  return s;
}

inline std::vector<ReviewRecord> planted_reviews(const PlantedSetup& s, std::size_t per_label,
                                                 std::uint64_t seed, std::size_t length,
                                                 const std::string& domain) {
  std::mt19937_64 rng(seed);
  std::vector<ReviewRecord> out;
  for (Label l : kLabels) {
    const auto& table = l == Label::genuine ? s.table_genuine : s.table_deceptive;
    std::vector<std::string> toks;
    std::vector<double> w;
    for (auto& [t, p] : table)
      if (t != kUnk) {
        toks.push_back(t);
        w.push_back(p);
      }
    std::discrete_distribution<std::size_t> dd(w.begin(), w.end());
    for (std::size_t k = 0; k < per_label; ++k) {
      std::string text;
      for (std::size_t t = 0; t < length; ++t) text += toks[dd(rng)] + ' ';
      out.push_back({domain + "-" + std::string(to_string(l)) + "-" + std::to_string(k), text, l,
                     domain, std::nullopt});
    }
  }
  return out;
}

}  // namespace lexcue::testing
