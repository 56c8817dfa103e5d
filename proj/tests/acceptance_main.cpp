#include <iostream>
#include <string>

#include "cgl/acceptance.hpp"
#include "cgl/config.hpp"

int main(int argc, char** argv) {
  const std::string out = argc > 1 ? argv[1] : "acceptance-out";
  try {
    cgl::RunConfig config;
    config.out_dir = out;
    const cgl::AcceptanceReport report = cgl::run_acceptance(config, out, &std::cout);
    int passed = 0;
    for (const auto& c : report.criteria) passed += c.ok();
    std::cout << passed << "/" << report.criteria.size() << " criteria passed\n";
    return report.all_passed() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << "\n";
    return 2;
  }
}
