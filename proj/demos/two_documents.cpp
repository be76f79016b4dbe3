// Two synthetic documents from a known topic model: weight estimates, the
// distance between their mixing measures, and a 95% interval for it.
// Optionally writes the inputs as CSV for the command-line tool:
//   demo_two_documents [output-dir]

#include <iomanip>
#include <iostream>

#include "mixwass/mixwass.hpp"

using namespace mixwass;

namespace {

void print_vector(const char* label, const Vector& v) {
  std::cout << std::setw(12) << label << " [";
  for (Eigen::Index k = 0; k < v.size(); ++k) std::cout << (k ? ", " : "") << std::setw(7) << v(k);
  std::cout << "]\n";
}

}  // namespace

int main(int argc, char** argv) {
  std::cout << std::fixed << std::setprecision(4);
  const int k = 5, p = 500;
  const std::int64_t n = 1000;
  const TopicMatrix a = sim::gen_topic_matrix(p, k, 2024);
  const CostMatrix cost = cost_matrix(a);
  const ProbVec alpha_i = sim::gen_weights(k, 3, 1);
  const ProbVec alpha_j = sim::gen_weights(k, 3, 2);
  const CountVector x_i = sim::gen_document(ProbVec(a.mix(alpha_i.values())), n, 11);
  const CountVector x_j = sim::gen_document(ProbVec(a.mix(alpha_j.values())), n, 12);

  const DocumentFit fi = fit_document(x_i, a);
  const DocumentFit fj = fit_document(x_j, a);
  print_vector("alpha_i", alpha_i.values());
  print_vector("MLE", fi.mle.alpha);
  print_vector("debiased", fi.debiased.alpha);
  print_vector("alpha_j", alpha_j.values());
  print_vector("MLE", fj.mle.alpha);
  print_vector("debiased", fj.debiased.alpha);

  const double w_true = wasserstein_primal(alpha_i, alpha_j, cost).value;
  const double w_dual = kr_dual_value(alpha_i.values() - alpha_j.values(), DualPolytope(cost)).value;
  const double w_tilde = distance_estimate(fi.debiased, fj.debiased, cost);
  std::cout << "\ntrue distance      primal " << w_true << "  dual " << w_dual << "\n";
  std::cout << "estimate (debiased)       " << w_tilde << "\n";

  LimitSamplerOptions lo;
  lo.M = 1000;
  lo.seed = 7;
  std::tie(lo.weight_i, lo.weight_j) = pair_cov_weights(n, n);
  const ConfidenceInterval plug = confidence_interval(w_tilde, limit_sampler(fi.mle, fj.mle, a, cost, lo), 0.05, n, n);
  BootstrapOptions bo;
  bo.B = 400;
  bo.seed = 7;
  const ConfidenceInterval deriv =
      confidence_interval(w_tilde, derivative_bootstrap(fi, fj, a, cost, bo), 0.05, n, n);
  std::cout << "95% plug-in interval      [" << plug.lower << ", " << plug.upper << "]"
            << (plug.covers(w_true) ? "  covers" : "  misses") << " the truth\n";
  std::cout << "95% derivative bootstrap  [" << deriv.lower << ", " << deriv.upper << "]"
            << (deriv.covers(w_true) ? "  covers" : "  misses") << " the truth\n";

  if (argc > 1) {
    const std::string dir = argv[1];
    io::save_matrix(a.matrix(), dir + "/topics.csv");
    io::save_counts({x_i, x_j}, dir + "/documents.csv");
    std::cout << "\nwrote " << dir << "/topics.csv and " << dir << "/documents.csv; try\n"
              << "  mixwass ci --counts " << dir << "/documents.csv --topics " << dir
              << "/topics.csv --method plugin,deriv-bs --seed 7\n";
  }
  return 0;
}
