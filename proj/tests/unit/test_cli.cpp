#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kScratch = fs::path(SWE_TEST_SCRATCH) / "cli";

int swe(const std::string& args, const std::string& tag) {
    const fs::path log = kScratch / (tag + ".stderr");
    const std::string cmd = std::string("\"") + SWE_BINARY + "\" " + args + " > \"" + (kScratch / (tag + ".stdout")).string() +
                            "\" 2> \"" + log.string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// little-endian float64 stream
std::vector<double> read_flat(const fs::path& p) {
    const auto bytes = slurp(p);
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 7; b >= 0; --b) bits = bits << 8 | static_cast<unsigned char>(bytes[8 * i + b]);
        std::memcpy(&out[i], &bits, 8);
    }
    return out;
}

struct Scratch {
    Scratch() {
        fs::remove_all(kScratch);
        fs::create_directories(kScratch);
    }
};

}  // namespace

TEST_CASE_FIXTURE(Scratch, "usage errors exit with status 2") {
    CHECK(swe("", "empty") == 2);
    CHECK(swe("frobnicate", "unknown") == 2);
    CHECK(swe("simulate --no-such-flag 1", "flag") == 2);
    CHECK(swe("--help", "help") == 0);
}

TEST_CASE_FIXTURE(Scratch, "invalid configs are reported as JSON with every violation") {
    CHECK(swe("simulate -d 2 --cov white --replicas 5 --out " + (kScratch / "bad").string(), "bad") == 2);
    const auto report = nlohmann::json::parse(slurp(kScratch / "bad.stderr"));
    CHECK(report["violations"].size() >= 1);
    CHECK(report["violations"][0].get<std::string>().find("Dalang") != std::string::npos);
    CHECK_FALSE(fs::exists(kScratch / "bad" / "manifest.json"));

    std::ofstream(kScratch / "broken.ini") << "[grid]\ncells = lots\n";
    CHECK(swe("simulate --config " + (kScratch / "broken.ini").string(), "broken") == 2);
}

TEST_CASE_FIXTURE(Scratch, "dalang-check writes its artifacts and a manifest") {
    const fs::path out = kScratch / "dalang";
    CHECK(swe("dalang-check -d 2 --cov riesz --beta 1.5 --out " + out.string(), "dalang") == 0);
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["subcommand"] == "dalang-check");
    CHECK(manifest["status"] == "pass");
    CHECK(manifest["seed"] == 1);
    for (const auto& a : manifest["artifacts"]) CHECK(fs::exists(out / a.get<std::string>()));
    const auto result = nlohmann::json::parse(slurp(out / "dalang.json"));
    CHECK(result.dump().find("finite") != std::string::npos);
}

TEST_CASE_FIXTURE(Scratch, "config file plus command-line override") {
    std::ofstream(kScratch / "sim.ini") << "; small run\n[grid]\nlength = 8\ncells = 32\n[noise]\nmodel = bump\ns = 0.5\n"
                                           "[equation]\nsigma = affine\n[run]\nreplicas = 3\n";
    const fs::path out = kScratch / "sim";
    CHECK(swe("simulate --config " + (kScratch / "sim.ini").string() + " --seed 9 --out " + out.string(), "sim") == 0);
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["seed"] == 9);
    CHECK(manifest["config"].get<std::string>().find("model = bump") != std::string::npos);
    CHECK(fs::exists(out / "field.csv"));
}

TEST_CASE_FIXTURE(Scratch, "binary field and kernel dumps") {
    const fs::path out = kScratch / "bin";
    CHECK(swe("simulate -d 2 --length 4 --cells 16 --cov bump --replicas 1 --dump-kernels --out " + out.string(),
              "bin") == 0);
    const auto field = read_flat(out / "field.bin");
    REQUIRE(field.size() == 4 + 16 * 16);
    CHECK(field[0] == 2.0);
    CHECK(field[1] == 16.0);
    CHECK(field[2] == 4.0);
    CHECK(field[3] == 1.0);
    const auto kernel = read_flat(out / "kernel.bin");
    REQUIRE(kernel.size() > 4);
    const int side = 2 * static_cast<int>(kernel[3]) + 1;
    CHECK(kernel.size() == 4u + static_cast<std::size_t>(side * side));
    double mass = 0.0;
    for (std::size_t i = 4; i < kernel.size(); ++i) mass += kernel[i] * kernel[2] * kernel[2];
    CHECK(mass == doctest::Approx(kernel[1]).epsilon(1e-12));
}

TEST_CASE_FIXTURE(Scratch, "results do not depend on the thread count") {
    const std::string common =
        "ergodicity --length 24 --cells 96 --radii 1,2,4,8 --replicas 200 --cov bump --width 0.5 --seed 5 ";
    const int one = swe(common + "--threads 1 --out " + (kScratch / "t1").string(), "t1");
    const int three = swe(common + "--threads 3 --out " + (kScratch / "t3").string(), "t3");
    CHECK(one == three);
    CHECK(one <= 1);
    const auto a = slurp(kScratch / "t1" / "ergodicity.csv");
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(kScratch / "t3" / "ergodicity.csv"));
    CHECK(a.find("\r\n") != std::string::npos);
}

TEST_CASE_FIXTURE(Scratch, "a failed property exits 1 and writes failure.json") {
    // V halves per doubling of R; a ratio threshold of 0.01 cannot be met
    const fs::path out = kScratch / "fail";
    CHECK(swe("ergodicity --length 24 --cells 96 --radii 1,2,4,8 --replicas 200 --ergodicity.decay_ratio 0.01 --out " +
                  out.string(),
              "fail") == 1);
    const auto failure = nlohmann::json::parse(slurp(out / "failure.json"));
    CHECK(failure["failures"][0]["property"] == "ergodic verdict");
    CHECK(nlohmann::json::parse(slurp(out / "manifest.json"))["status"] == "fail");
}
