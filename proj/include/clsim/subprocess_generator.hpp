#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "clsim/augment.hpp"
#include "clsim/image.hpp"
#include "clsim/image_io.hpp"

namespace clsim {

/**
 * Generator port backed by an external program, so real generative
 * models can be plugged in without linking against this library.
 *
 * Per call the adapter writes `request.json` into a fresh scratch
 * directory and invokes `<program> <request.json>`. Request schema:
 *
 *   { "sub_class": str, "count": int, "seed": int,
 *     "width": int, "height": int, "out_dir": str }
 *
 * The program must write its images (PNG or JPEG) under out_dir and a
 * `response.json` next to the request:
 *
 *   { "images": [path, ...] }   // paths relative to out_dir
 *
 * A non-zero exit status or a wrong image count is an error. Images are
 * resampled to the configured size if the program produced another one.
 */
class SubprocessGenerator : public GeneratorPort {
public:
    SubprocessGenerator(std::string program, Size common_size, std::filesystem::path scratch_dir)
        : program_(std::move(program)), common_size_(common_size),
          scratch_(std::move(scratch_dir)) {
        if (program_.empty()) throw std::invalid_argument("subprocess generator: empty program path");
        std::filesystem::create_directories(scratch_);
    }

    std::vector<GrayImage> generate(const std::string& sub_class, std::size_t count,
                                    std::uint64_t seed) override {
        namespace fs = std::filesystem;
        const fs::path call_dir = scratch_ / ("call_" + std::to_string(call_counter_++));
        const fs::path out_dir = call_dir / "out";
        fs::create_directories(out_dir);

        const fs::path request_path = call_dir / "request.json";
        {
            nlohmann::json req{{"sub_class", sub_class}, {"count", count},  {"seed", seed},
                               {"width", common_size_.width}, {"height", common_size_.height},
                               {"out_dir", out_dir.string()}};
            std::ofstream out(request_path);
            if (!out) throw std::runtime_error("subprocess generator: cannot write request");
            out << req.dump(2) << '\n';
        }

        const std::string cmd = "\"" + program_ + "\" \"" + request_path.string() + "\"";
        const int status = std::system(cmd.c_str());
        if (status != 0)
            throw std::runtime_error("subprocess generator: '" + program_ +
                                     "' exited with status " + std::to_string(status));

        const fs::path response_path = call_dir / "response.json";
        std::ifstream in(response_path);
        if (!in) throw std::runtime_error("subprocess generator: missing response.json");
        nlohmann::json resp;
        try {
            in >> resp;
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(std::string("subprocess generator: malformed response: ") +
                                     e.what());
        }

        std::vector<GrayImage> images;
        for (const auto& rel : resp.at("images")) {
            fs::path p(rel.get<std::string>());
            if (!p.is_absolute()) p = out_dir / p;
            images.push_back(load_image(p, common_size_));
        }
        if (images.size() != count)
            throw std::runtime_error("subprocess generator: expected " + std::to_string(count) +
                                     " images, got " + std::to_string(images.size()));
        return images;
    }

private:
    std::string program_;
    Size common_size_;
    std::filesystem::path scratch_;
    std::size_t call_counter_ = 0;
};

}  // namespace clsim
