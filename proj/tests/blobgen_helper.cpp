// Toy generator speaking the subprocess protocol: reads a request file,
// renders blob images for the requested sub-class, and reports them in
// response.json next to the request.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <json.hpp>

#include "clsim/baseline.hpp"
#include "clsim/image_io.hpp"

int main(int argc, char** argv) {
    try {
        if (argc != 2) throw std::runtime_error("usage: blobgen_helper <request.json>");
        const std::filesystem::path request_path(argv[1]);
        std::ifstream in(request_path);
        if (!in) throw std::runtime_error("cannot open request: " + request_path.string());
        nlohmann::json req;
        in >> req;

        const auto sub_class = req.at("sub_class").get<std::string>();
        const auto count = req.at("count").get<std::size_t>();
        const auto seed = req.at("seed").get<std::uint64_t>();
        const clsim::Size size{req.at("width").get<int>(), req.at("height").get<int>()};
        const std::filesystem::path out_dir(req.at("out_dir").get<std::string>());

        clsim::BlobGenerator generator(size);
        const auto images = generator.generate(sub_class, count, seed);

        std::filesystem::create_directories(out_dir);
        nlohmann::json names = nlohmann::json::array();
        for (std::size_t k = 0; k < images.size(); ++k) {
            const std::string name = "img_" + std::to_string(k) + ".png";
            clsim::write_png_gray(out_dir / name, images[k]);
            names.push_back(name);
        }

        std::ofstream out(request_path.parent_path() / "response.json");
        if (!out) throw std::runtime_error("cannot write response.json");
        out << nlohmann::json{{"images", names}}.dump(2) << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "blobgen_helper: " << e.what() << '\n';
        return 1;
    }
}
