#include <filesystem>
#include <fstream>

#include <catch2/catch_amalgamated.hpp>

#include "clsim/clsim.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

void write_script(const fs::path& file, const std::string& body) {
    {
        std::ofstream out(file);
        out << "#!/bin/sh\n" << body;
    }
    fs::permissions(file, fs::perms::owner_all | fs::perms::group_read | fs::perms::others_read);
}

}  // namespace

TEST_CASE("subprocess generator round-trip") {
    const clsim::Size size{16, 16};
    testutil::TempDir dir;
    clsim::SubprocessGenerator gen(CLSIM_BLOBGEN_PATH, size, dir.path() / "scratch");

    auto batch = gen.generate("s2", 3, 11);
    REQUIRE(batch.size() == 3);
    for (const auto& img : batch) CHECK(img.size() == size);

    SECTION("matches the in-process generator bit for bit") {
        clsim::BlobGenerator reference(size);
        const auto expected = reference.generate("s2", 3, 11);
        for (std::size_t k = 0; k < 3; ++k) CHECK(batch[k].pixels == expected[k].pixels);
    }

    SECTION("repeating a call reproduces the batch") {
        const auto again = gen.generate("s2", 3, 11);
        for (std::size_t k = 0; k < 3; ++k) CHECK(again[k].pixels == batch[k].pixels);
    }

    SECTION("distinct seeds change the output") {
        const auto other = gen.generate("s2", 3, 12);
        CHECK(other[0].pixels != batch[0].pixels);
    }
}

TEST_CASE("subprocess generator failure modes") {
    const clsim::Size size{8, 8};
    testutil::TempDir dir;

    SECTION("missing program") {
        clsim::SubprocessGenerator gen((dir.path() / "no_such_binary").string(), size,
                                       dir.path() / "scratch");
        CHECK_THROWS_AS(gen.generate("s1", 1, 0), std::runtime_error);
    }

    SECTION("non-zero exit status") {
        const fs::path script = dir.path() / "fail.sh";
        write_script(script, "exit 3\n");
        clsim::SubprocessGenerator gen(script.string(), size, dir.path() / "scratch");
        CHECK_THROWS_AS(gen.generate("s1", 1, 0), std::runtime_error);
    }

    SECTION("no response file") {
        const fs::path script = dir.path() / "silent.sh";
        write_script(script, "exit 0\n");
        clsim::SubprocessGenerator gen(script.string(), size, dir.path() / "scratch");
        CHECK_THROWS_AS(gen.generate("s1", 1, 0), std::runtime_error);
    }

    SECTION("malformed response") {
        const fs::path script = dir.path() / "garbage.sh";
        write_script(script, "echo 'not json' > \"$(dirname \"$1\")/response.json\"\n");
        clsim::SubprocessGenerator gen(script.string(), size, dir.path() / "scratch");
        CHECK_THROWS_AS(gen.generate("s1", 1, 0), std::runtime_error);
    }

    SECTION("wrong image count") {
        const fs::path script = dir.path() / "empty.sh";
        write_script(script, "echo '{\"images\": []}' > \"$(dirname \"$1\")/response.json\"\n");
        clsim::SubprocessGenerator gen(script.string(), size, dir.path() / "scratch");
        CHECK_THROWS_AS(gen.generate("s1", 2, 0), std::runtime_error);
    }

    SECTION("empty program path") {
        CHECK_THROWS_AS(clsim::SubprocessGenerator("", size, dir.path() / "scratch"),
                        std::invalid_argument);
    }
}
