// Simulates the tiger problem with and without the hidden state in the
// observation and runs order selection on both.
#include <iostream>

#include "mol/envs/simulate.hpp"
#include "mol/markov/order_selection.hpp"

int main() {
  mol::EpsilonListenPolicy behavior(0.8);
  mol::TestConfig config;
  config.replications = 500;
  config.seed = 7;
  // Discrete observations: a richer, lightly penalized nuisance fit.
  config.regressor.num_features = 400;
  config.regressor.penalty = 1e-4;

  for (bool reveal : {false, true}) {
    mol::TigerConfig tiger;
    tiger.reveal_state = reveal;
    const auto data = mol::simulate(mol::EnvSpec{tiger}, behavior, 100, 50, 11);
    const auto report = mol::select_order(data, 3, config);
    std::cout << (reveal ? "state revealed" : "state hidden  ") << ":";
    for (const auto& r : report.tested) std::cout << "  k=" << r.order << " p=" << r.p_value;
    std::cout << "  -> " << report.to_json()["verdict"].get<std::string>() << '\n';
  }
}
