#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "latb/cli.hpp"

namespace {

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int finish(const latb::RunResult& r) {
    std::fputs(r.out.c_str(), stdout);
    std::fputs(r.err.c_str(), stderr);
    return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "latb: no-arbitrage price bounds for multi-asset claims on a binomial lattice"};
    app.require_subcommand(1);

    std::string config_path;
    latb::CliOverrides overrides;
    std::string method, nodes;
    int threads = 0;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "JSON configuration file")->required();
    };

    CLI::App* price = app.add_subcommand(
        "price", "lower and upper price bounds, as CSV on stdout");
    add_config(price);
    price->add_option("--method", method, "pricing route: auto, lp, closed, or both")
        ->check(CLI::IsMember({"auto", "lp", "closed", "both"}));
    price->add_option("--nodes", nodes, "emit the root only, or every node")
        ->check(CLI::IsMember({"root", "all"}));
    price->add_option("--threads", threads, "worker threads for the induction")
        ->check(CLI::PositiveNumber);

    CLI::App* certify = app.add_subcommand(
        "certify", "classify the claim's one-step interaction structure");
    add_config(certify);

    CLI::App* vertices = app.add_subcommand(
        "vertices", "extreme points of the one-step martingale polytope");
    add_config(vertices);

    CLI11_PARSE(app, argc, argv);

    std::optional<std::string> text = read_file(config_path);
    if (!text) {
        std::fprintf(stderr, "error: cannot read %s\n", config_path.c_str());
        return 1;
    }
    if (!method.empty()) overrides.method = method;
    if (!nodes.empty()) overrides.nodes = nodes;
    if (threads > 0) overrides.threads = threads;

    if (price->parsed()) return finish(latb::price_command(*text, overrides));
    if (certify->parsed()) return finish(latb::certify_command(*text));
    return finish(latb::vertices_command(*text));
}
