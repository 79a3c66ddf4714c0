// Regenerates the shipped model files: dump_models [outdir]
#include <cstdio>
#include <filesystem>

#include "homog/models.hpp"

int main(int argc, char** argv) {
  std::filesystem::path outdir = argc > 1 ? argv[1] : "models";
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  try {
    for (const std::string& name : homog::model_names()) {
      homog::ProblemSpec spec = homog::make_model(name);
      std::filesystem::path path = outdir / (name + ".json");
      homog::write_model(path.string(), spec);
      std::printf("%s\n", path.string().c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dump_models: %s\n", e.what());
    return 1;
  }
  return 0;
}
