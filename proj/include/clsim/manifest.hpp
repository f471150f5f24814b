#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "clsim/image.hpp"

namespace clsim {

class ManifestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ImageRef {
    std::string path;
    bool synthetic = false;

    bool operator==(const ImageRef&) const = default;
};

struct SubClass {
    std::string id;
    std::vector<ImageRef> images;

    bool operator==(const SubClass&) const = default;
};

struct SuperClass {
    std::string id;
    std::vector<SubClass> sub_classes;

    bool operator==(const SuperClass&) const = default;
};

/**
 * Super-class -> sub-class -> image mapping for one dataset.
 *
 * The grouping is always an explicit input; nothing here infers or
 * clusters classes. Image paths resolve relative to base_dir, which is
 * the manifest file's directory and is not serialized.
 */
struct ClassHierarchy {
    std::string name;
    std::optional<Size> common_size;
    std::vector<SuperClass> super_classes;
    std::filesystem::path base_dir;

    std::size_t total_image_count() const {
        std::size_t n = 0;
        for (const auto& sup : super_classes)
            for (const auto& sub : sup.sub_classes) n += sub.images.size();
        return n;
    }

    /// Sorted list of all sub-class ids.
    std::vector<std::string> sub_class_ids() const {
        std::vector<std::string> ids;
        for (const auto& sup : super_classes)
            for (const auto& sub : sup.sub_classes) ids.push_back(sub.id);
        std::sort(ids.begin(), ids.end());
        return ids;
    }

    bool operator==(const ClassHierarchy& o) const {
        return name == o.name && common_size == o.common_size && super_classes == o.super_classes;
    }
};

struct ClassCounts {
    std::map<std::string, std::size_t> per_sub_class;
    std::size_t max_count = 0;
    std::size_t min_count = 0;
};

inline void validate_hierarchy(const ClassHierarchy& h) {
    if (h.super_classes.empty()) throw ManifestError("manifest has no super-classes");
    std::set<std::string> super_ids;
    std::set<std::string> sub_ids;
    for (const auto& sup : h.super_classes) {
        if (sup.id.empty()) throw ManifestError("super-class with empty id");
        if (!super_ids.insert(sup.id).second)
            throw ManifestError("duplicate super-class id: " + sup.id);
        if (sup.sub_classes.empty())
            throw ManifestError("super-class has no sub-classes: " + sup.id);
        for (const auto& sub : sup.sub_classes) {
            if (sub.id.empty()) throw ManifestError("sub-class with empty id in super-class " + sup.id);
            if (!sub_ids.insert(sub.id).second)
                throw ManifestError("sub-class listed more than once: " + sub.id);
            if (sub.images.empty())
                throw ManifestError("sub-class has no images: " + sub.id);
            for (const auto& ref : sub.images)
                if (ref.path.empty())
                    throw ManifestError("empty image path in sub-class " + sub.id);
        }
    }
}

inline ClassHierarchy hierarchy_from_json(const nlohmann::json& j, std::filesystem::path base_dir = {}) {
    ClassHierarchy h;
    h.base_dir = std::move(base_dir);
    try {
        h.name = j.value("name", std::string{});
        if (j.contains("common_size") && !j.at("common_size").is_null()) {
            const auto& cs = j.at("common_size");
            h.common_size = Size{cs.at(0).get<int>(), cs.at(1).get<int>()};
        }
        for (const auto& jsup : j.at("super_classes")) {
            SuperClass sup;
            sup.id = jsup.at("id").get<std::string>();
            for (const auto& jsub : jsup.at("sub_classes")) {
                SubClass sub;
                sub.id = jsub.at("id").get<std::string>();
                for (const auto& jimg : jsub.at("images")) {
                    ImageRef ref;
                    if (jimg.is_string()) {
                        ref.path = jimg.get<std::string>();
                    } else {
                        ref.path = jimg.at("path").get<std::string>();
                        ref.synthetic = jimg.value("synthetic", false);
                    }
                    sub.images.push_back(std::move(ref));
                }
                sup.sub_classes.push_back(std::move(sub));
            }
            h.super_classes.push_back(std::move(sup));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ManifestError(std::string("malformed manifest: ") + e.what());
    }
    validate_hierarchy(h);
    return h;
}

inline nlohmann::json hierarchy_to_json(const ClassHierarchy& h) {
    nlohmann::json j;
    j["name"] = h.name;
    if (h.common_size)
        j["common_size"] = {h.common_size->width, h.common_size->height};
    else
        j["common_size"] = nullptr;
    j["super_classes"] = nlohmann::json::array();
    for (const auto& sup : h.super_classes) {
        nlohmann::json jsup;
        jsup["id"] = sup.id;
        jsup["sub_classes"] = nlohmann::json::array();
        for (const auto& sub : sup.sub_classes) {
            nlohmann::json jsub;
            jsub["id"] = sub.id;
            jsub["images"] = nlohmann::json::array();
            for (const auto& ref : sub.images) {
                if (ref.synthetic)
                    jsub["images"].push_back({{"path", ref.path}, {"synthetic", true}});
                else
                    jsub["images"].push_back(ref.path);
            }
            jsup["sub_classes"].push_back(std::move(jsub));
        }
        j["super_classes"].push_back(std::move(jsup));
    }
    return j;
}

/// Parse and validate a manifest file. Image files are not opened here.
inline ClassHierarchy load_manifest(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ManifestError("cannot open manifest: " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ManifestError("manifest parse failure in " + file.string() + ": " + e.what());
    }
    return hierarchy_from_json(j, file.parent_path());
}

inline void save_manifest(const ClassHierarchy& h, const std::filesystem::path& file) {
    validate_hierarchy(h);
    std::ofstream out(file);
    if (!out) throw ManifestError("cannot write manifest: " + file.string());
    out << hierarchy_to_json(h).dump(2) << '\n';
}

/**
 * Build a manifest from a two-level `super/sub` directory tree holding
 * .png, .jpg, or .jpeg files. Entries are sorted so the result is
 * independent of directory enumeration order.
 */
inline ClassHierarchy manifest_from_directory(const std::filesystem::path& root, std::string name = {}) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw ManifestError("not a directory: " + root.string());

    ClassHierarchy h;
    h.name = name.empty() ? root.filename().string() : std::move(name);
    h.base_dir = root;

    std::vector<fs::path> super_dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) super_dirs.push_back(e.path());
    std::sort(super_dirs.begin(), super_dirs.end());

    for (const auto& sup_dir : super_dirs) {
        SuperClass sup;
        sup.id = sup_dir.filename().string();
        std::vector<fs::path> sub_dirs;
        for (const auto& e : fs::directory_iterator(sup_dir))
            if (e.is_directory()) sub_dirs.push_back(e.path());
        std::sort(sub_dirs.begin(), sub_dirs.end());
        for (const auto& sub_dir : sub_dirs) {
            SubClass sub;
            sub.id = sub_dir.filename().string();
            std::vector<std::string> files;
            for (const auto& e : fs::directory_iterator(sub_dir)) {
                if (!e.is_regular_file()) continue;
                std::string ext = e.path().extension().string();
                std::transform(ext.begin(), ext.end(), ext.begin(),
                               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
                if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
                    files.push_back(fs::relative(e.path(), root).generic_string());
            }
            std::sort(files.begin(), files.end());
            for (auto& f : files) sub.images.push_back({std::move(f), false});
            if (!sub.images.empty()) sup.sub_classes.push_back(std::move(sub));
        }
        if (!sup.sub_classes.empty()) h.super_classes.push_back(std::move(sup));
    }
    validate_hierarchy(h);
    return h;
}

inline ClassCounts class_counts(const ClassHierarchy& h) {
    ClassCounts counts;
    for (const auto& sup : h.super_classes)
        for (const auto& sub : sup.sub_classes) counts.per_sub_class[sub.id] = sub.images.size();
    bool first = true;
    for (const auto& [id, n] : counts.per_sub_class) {
        if (first) {
            counts.max_count = counts.min_count = n;
            first = false;
        } else {
            counts.max_count = std::max(counts.max_count, n);
            counts.min_count = std::min(counts.min_count, n);
        }
    }
    return counts;
}

inline std::filesystem::path resolve_image_path(const ClassHierarchy& h, const ImageRef& ref) {
    std::filesystem::path p(ref.path);
    if (p.is_absolute() || h.base_dir.empty()) return p;
    return h.base_dir / p;
}

}  // namespace clsim
