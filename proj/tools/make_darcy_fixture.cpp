// Regenerates fixtures/darcy_theta_ref.txt and fixtures/darcy_y_ref.txt:
// theta_ref ~ N(0, I_32) drawn with std::mt19937_64, y_ref = G(theta_ref).
#include <cstdint>
#include <iostream>
#include <random>
#include <string>

#include "kinv/errors.hpp"
#include "kinv/forward_models.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_darcy_fixture <fixture-dir> [seed]\n";
    return 2;
  }
  const std::string dir = argv[1];
  const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 20210301ULL;
  try {
    const kinv::DarcyConfig config;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    kinv::Vector theta(config.n_kl);
    for (auto& v : theta) v = normal(rng);
    const kinv::Vector y = kinv::darcy_solve(theta, config);
    kinv::write_vector_file(dir + "/darcy_theta_ref.txt", {theta.data(), static_cast<std::size_t>(theta.size())});
    kinv::write_vector_file(dir + "/darcy_y_ref.txt", {y.data(), static_cast<std::size_t>(y.size())});
  } catch (const kinv::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
