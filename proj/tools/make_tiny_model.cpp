// halo-mktiny: writes a random-weight model directory for desk-scale runs.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "halo/error.hpp"
#include "halo/experiment.hpp"
#include "halo/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write a random-weight LLaMA-architecture model"};
  std::string out;
  std::uint64_t seed = 0;
  int layers = 4, hidden = 64, heads = 4, vocab = 256, ffn = 128, max_seq = 512;
  bool orthonormal = false;
  std::string dtype = "f32";
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--seed", seed, "Weight seed");
  app.add_option("--layers", layers);
  app.add_option("--hidden", hidden);
  app.add_option("--heads", heads);
  app.add_option("--vocab", vocab);
  app.add_option("--ffn", ffn);
  app.add_option("--max-seq-len", max_seq);
  app.add_option("--dtype", dtype, "f32 | f16")->check(CLI::IsMember({"f32", "f16"}));
  app.add_flag("--orthonormal-unembedding", orthonormal,
               "Replace the unembedding with orthonormal rows (needs vocab <= hidden)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto config = halo::tiny_config(layers, hidden, heads, vocab, ffn, max_seq);
    config.validate();
    auto tensors = halo::random_weights(config, seed);
    if (orthonormal) halo::orthonormalize_unembedding(tensors, config);
    halo::save_model(out, config, tensors, dtype == "f16" ? halo::DType::f16 : halo::DType::f32);
  } catch (const std::exception& e) {
    std::cerr << "halo-mktiny: error: " << e.what() << '\n';
    return halo::exit_code_for(e);
  }
  return 0;
}
