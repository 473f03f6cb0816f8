#include "shadowfix/fixmine.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace shadowfix::fixmine {

std::string_view to_string(Outcome o) noexcept { return o == Outcome::pass ? "pass" : "fail"; }

std::optional<Outcome> parse_outcome(std::string_view s) noexcept {
    if (s == "pass") {
        return Outcome::pass;
    }
    if (s == "fail") {
        return Outcome::fail;
    }
    return std::nullopt;
}

namespace {

bool record_before(const BuildRecord& a, const BuildRecord& b) {
    if (a.timestamp != b.timestamp) {
        return a.timestamp < b.timestamp;
    }
    return a.build_id < b.build_id;
}

BuildRecord load_meta(const fs::path& dir, const std::string& expected_id) {
    const auto meta_path = dir / "meta.json";
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(meta_path.string()));
    } catch (const nlohmann::json::exception& e) {
        throw ArchiveError(meta_path.string() + ": " + e.what());
    } catch (const Error& e) {
        throw ArchiveError(e.what());
    }
    BuildRecord r;
    try {
        r.build_id = j.at("build_id").get<std::string>();
        r.commit_id = j.value("commit_id", "");
        const auto ts = j.at("timestamp").get<std::string>();
        const auto parsed = parse_iso8601(ts);
        if (!parsed) {
            throw ArchiveError(meta_path.string() + ": bad timestamp '" + ts + "'");
        }
        r.timestamp = *parsed;
        const auto outcome = j.at("outcome").get<std::string>();
        const auto o = parse_outcome(outcome);
        if (!o) {
            throw ArchiveError(meta_path.string() + ": bad outcome '" + outcome + "'");
        }
        r.outcome = *o;
    } catch (const nlohmann::json::exception& e) {
        throw ArchiveError(meta_path.string() + ": " + e.what());
    }
    if (r.build_id != expected_id) {
        throw ArchiveError(meta_path.string() + ": build_id '" + r.build_id + "' does not match directory '" +
                           expected_id + "'");
    }
    r.log_path = dir / "log.txt";
    r.snapshot_path = dir / "src";
    return r;
}

}  // namespace

Archive Archive::load(const fs::path& root) {
    const auto order_path = root / "order.txt";
    if (!fs::is_regular_file(order_path)) {
        throw ArchiveError("missing " + order_path.string());
    }
    Archive a;
    a.root_ = root;
    std::set<std::string> seen;
    for (const auto& line : split_lines(read_file(order_path.string()))) {
        const auto id = std::string(trim(line));
        if (id.empty()) {
            continue;
        }
        if (!seen.insert(id).second) {
            throw ArchiveError("duplicate build id '" + id + "' in order.txt");
        }
        const auto dir = root / "builds" / id;
        if (!fs::is_directory(dir)) {
            throw ArchiveError("order.txt lists '" + id + "' but " + dir.string() + " is missing");
        }
        a.records_.push_back(load_meta(dir, id));
    }
    if (!std::is_sorted(a.records_.begin(), a.records_.end(), record_before)) {
        throw ArchiveError("order.txt is not chronological");
    }
    return a;
}

const BuildRecord* Archive::find(std::string_view build_id) const noexcept {
    for (const auto& r : records_) {
        if (r.build_id == build_id) {
            return &r;
        }
    }
    return nullptr;
}

const BuildRecord& Archive::get(std::string_view build_id) const {
    if (const auto* r = find(build_id)) {
        return *r;
    }
    throw ArchiveError("unknown build '" + std::string(build_id) + "'");
}

std::string Archive::read_log(const BuildRecord& record) const {
    if (!fs::is_regular_file(record.log_path)) {
        return {};
    }
    return read_file(record.log_path.string());
}

std::optional<fs::path> resolve_within(const fs::path& root, std::string_view file) {
    const fs::path rel = fs::path(std::string(file)).lexically_normal();
    if (rel.empty() || rel.is_absolute() || rel.has_root_name()) {
        return std::nullopt;
    }
    const auto first = *rel.begin();
    if (first == "..") {
        return std::nullopt;
    }
    return root / rel;
}

std::optional<std::string> Archive::read_source(const BuildRecord& record, std::string_view file) const {
    const auto path = resolve_within(record.snapshot_path, file);
    if (!path || !fs::is_regular_file(*path)) {
        return std::nullopt;
    }
    return read_file(path->string());
}

ArchiveWriter::ArchiveWriter(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_ / "builds");
    const auto order_path = root_ / "order.txt";
    if (fs::is_regular_file(order_path)) {
        for (const auto& line : split_lines(read_file(order_path.string()))) {
            const auto id = std::string(trim(line));
            if (!id.empty()) {
                order_.emplace_back(load_meta(root_ / "builds" / id, id).timestamp, id);
            }
        }
    }
}

fs::path ArchiveWriter::prepare(const BuildRecord& meta, std::string_view log) {
    for (const auto& [_, id] : order_) {
        if (id == meta.build_id) {
            throw ArchiveError("build '" + meta.build_id + "' already in archive");
        }
    }
    if (meta.build_id.empty() || !resolve_within(root_, meta.build_id) ||
        meta.build_id.find('/') != std::string::npos) {
        throw ArchiveError("invalid build id '" + meta.build_id + "'");
    }
    const auto dir = root_ / "builds" / meta.build_id;
    fs::create_directories(dir / "src");
    const nlohmann::json j{{"build_id", meta.build_id},
                           {"commit_id", meta.commit_id},
                           {"timestamp", format_iso8601(meta.timestamp)},
                           {"outcome", std::string(to_string(meta.outcome))}};
    write_file((dir / "meta.json").string(), j.dump(2) + "\n");
    write_file((dir / "log.txt").string(), log);
    order_.emplace_back(meta.timestamp, meta.build_id);
    return dir;
}

void ArchiveWriter::add(const BuildRecord& meta, std::string_view log, const fs::path& snapshot_dir) {
    const auto dir = prepare(meta, log);
    fs::copy(snapshot_dir, dir / "src", fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    write_order();
}

void ArchiveWriter::add(const BuildRecord& meta, std::string_view log,
                        const std::map<std::string, std::string>& files) {
    const auto dir = prepare(meta, log);
    for (const auto& [name, contents] : files) {
        const auto path = resolve_within(dir / "src", name);
        if (!path) {
            throw ArchiveError("invalid snapshot path '" + name + "'");
        }
        fs::create_directories(path->parent_path());
        write_file(path->string(), contents);
    }
    write_order();
}

void ArchiveWriter::write_order() {
    std::sort(order_.begin(), order_.end());
    std::string text;
    for (const auto& [_, id] : order_) {
        text += id;
        text += '\n';
    }
    write_file((root_ / "order.txt").string(), text);
}

}  // namespace shadowfix::fixmine
