#pragma once

#include <boost/property_tree/ptree.hpp>
#include <cstdint>
#include <filesystem>
#include <string>

namespace kamq::app {

struct Context {
  boost::property_tree::ptree cfg;
  std::filesystem::path config_dir;
  std::filesystem::path out;
  std::uint64_t seed = 1;
};

Context load_context(const std::string& config_path, const std::string& out_dir, std::uint64_t seed_override,
                     bool seed_given);

void cmd_reduce(const Context& ctx);
void cmd_iterate(const Context& ctx);
void cmd_spectrum(const Context& ctx);
void cmd_compare(const Context& ctx);
void cmd_measure(const Context& ctx);
void cmd_scar(const Context& ctx);
void cmd_gamma(const Context& ctx);

// Config echo, seed and library versions.
void write_manifest(const Context& ctx, const std::string& command);

// Parses argv, dispatches, maps errors to exit codes.
int run(int argc, char** argv);

}  // namespace kamq::app
