#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diqc/cli.h"

int main(int argc, char** argv) {
  CLI::App app{"Differential IQC gain certification"};
  app.require_subcommand(1);

  diqc::Overrides o;
  std::string model, cert;
  double theta = 0.0, tol = 0.0;
  int p_degree = 0, mult_degree = 0;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* c) {
    c->add_option("--p-degree", p_degree, "degree of the storage matrix P(x), even");
    c->add_option("--mult-degree", mult_degree, "degree of the S-procedure multipliers");
    c->add_option("--seed", seed, "seed for sampling and simulation");
    c->add_option("--tol", tol, "conic solver tolerance")->check(CLI::PositiveNumber);
    c->add_option("--out", o.out, "output file");
  };

  auto* certify = app.add_subcommand("certify", "certify a model and write <model>.cert.json");
  certify->add_option("model", model, "model file")->required();
  certify->add_option("--theta", theta, "delay bound")->check(CLI::NonNegativeNumber);
  common(certify);

  auto* sweep = app.add_subcommand("sweep", "certify over a list of delay bounds, CSV output");
  sweep->add_option("model", model, "model file")->required();
  sweep->add_option("--thetas", o.thetas, "delay bounds (default: the model's sweep)")
      ->delimiter(',');
  sweep->add_option("--jobs", o.jobs, "concurrent rows")->check(CLI::PositiveNumber);
  common(sweep);

  auto* validate = app.add_subcommand("validate", "re-check a certificate and simulate");
  validate->add_option("model", model, "model file")->required();
  validate->add_option("cert", cert, "certificate file")->required();
  validate->add_option("--out", o.out, "JSON report file");

  auto* selftest = app.add_subcommand("selftest", "run the built-in example battery");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : diqc::kExitError;
  }

  auto* sub = app.get_subcommands().front();
  auto set = [&](const char* name, auto& field, auto value) {
    if (sub->get_option_no_throw(name) != nullptr && sub->count(name) > 0) field = value;
  };
  set("--theta", o.theta, theta);
  set("--p-degree", o.p_degree, p_degree);
  set("--mult-degree", o.mult_degree, mult_degree);
  set("--seed", o.seed, seed);
  set("--tol", o.tol, tol);

  if (sub == certify) return diqc::CmdCertify(model, o, std::cout, std::cerr);
  if (sub == sweep) return diqc::CmdSweep(model, o, std::cout, std::cerr);
  if (sub == validate) return diqc::CmdValidate(model, cert, o, std::cout, std::cerr);
  if (sub == selftest) return diqc::CmdSelftest(std::cout, std::cerr);
  return diqc::kExitError;
}
