#include "shadowfix/fixmine.hpp"

#include "enum_check.hpp"
#include "temp_dir.hpp"

#include <doctest.h>

#include <set>

using namespace shadowfix;
using namespace shadowfix::fixmine;
using shadowfix::diagnostics::CompileError;
using shadowfix::diagnostics::Taxonomy;

namespace {

Instant t0() { return *parse_iso8601("2024-05-01T08:00:00Z"); }

BuildRecord rec(std::string id, Outcome o, int minute) {
    BuildRecord r;
    r.build_id = std::move(id);
    r.commit_id = "c-" + r.build_id;
    r.timestamp = t0() + std::chrono::minutes(minute);
    r.outcome = o;
    return r;
}

CompileError err(std::string file, std::size_t line, std::string message, std::string category = "") {
    CompileError e;
    e.file = std::move(file);
    e.line = line;
    e.message = std::move(message);
    e.category = std::move(category);
    return e;
}

std::string gcc_line(const std::string& file, std::size_t line, const std::string& msg) {
    return file + ":" + std::to_string(line) + ":5: error: " + msg + "\n";
}

}  // namespace

TEST_CASE("find_first_success") {
    const std::vector a{rec("F1", Outcome::fail, 0), rec("F2", Outcome::fail, 1), rec("S1", Outcome::pass, 2),
                        rec("S2", Outcome::pass, 3)};
    CHECK(find_first_success(a, "F1") == "S1");

    const std::vector lone{rec("F1", Outcome::fail, 0)};
    try {
        (void)find_first_success(lone, "F1");
        FAIL("expected an error");
    } catch (const MiningError& e) {
        CHECK(e.code() == MiningErrc::no_subsequent_success);
    }

    const std::vector b{rec("S0", Outcome::pass, 0), rec("F1", Outcome::fail, 1), rec("S1", Outcome::pass, 2)};
    CHECK(find_first_success(b, "F1") == "S1");

    const std::vector same_time{rec("F1", Outcome::fail, 0), rec("S1", Outcome::pass, 0), rec("S2", Outcome::pass, 4)};
    CHECK(find_first_success(same_time, "F1") == "S2");

    CHECK_THROWS_AS((void)find_first_success(b, "S0"), std::invalid_argument);
    CHECK_THROWS_AS((void)find_first_success(b, "nope"), std::invalid_argument);
}

TEST_CASE("diff_lines and merging") {
    const std::vector<std::string> a{"a", "b", "c", "d", "e", "f", "g"};
    CHECK(diff_lines(a, a).empty());

    auto b = a;
    b[1] = "B";
    b[3] = "D";
    const auto merged = diff_lines(a, b);
    REQUIRE(merged.size() == 1);
    CHECK(merged[0] == Hunk{2, 3, 2, 3});

    const auto apart = diff_lines(a, b, 0);
    REQUIRE(apart.size() == 2);
    CHECK(apart[0] == Hunk{2, 1, 2, 1});
    CHECK(apart[1] == Hunk{4, 1, 4, 1});

    const std::vector<std::string> ins{"a", "b", "x", "c", "d", "e", "f", "g"};
    const auto h = diff_lines(a, ins);
    REQUIRE(h.size() == 1);
    CHECK(h[0] == Hunk{3, 0, 3, 1});

    const std::vector<std::string> del{"a", "b", "d", "e", "f", "g"};
    CHECK(diff_lines(a, del) == std::vector{Hunk{3, 1, 3, 0}});
}

TEST_CASE("nearest_hunk") {
    const std::vector<Hunk> hunks{{3, 2, 3, 2}, {10, 1, 10, 1}};
    CHECK(nearest_hunk(hunks, 4) == 0);
    CHECK(nearest_hunk(hunks, 10) == 1);
    CHECK(nearest_hunk(hunks, 7) == 0);
    CHECK(nearest_hunk(hunks, 8) == 1);
    const std::vector<Hunk> insertion{{5, 0, 5, 1}};
    CHECK(nearest_hunk(insertion, 4) == 0);
}

TEST_CASE("derive_segment on the enum-check fix") {
    const std::string failing = testing::kEnumCheckBug;
    auto fixing = failing;
    const std::string old_line = "    if (type == ObjectType::TYPE_II)";
    fixing.replace(fixing.find(old_line), old_line.size(), testing::kEnumCheckFix);

    const auto ex = derive_segment(failing, fixing, 2);
    CHECK(trim(ex.faulty_segment) == "if (type == ObjectType::TYPE_II)");
    CHECK(trim(ex.fixed_segment) == "if ((type == ObjectType::TYPE_II) || (type == ObjectType::TYPE_I))");
    CHECK(ex.faulty_first == 2);
    CHECK(ex.faulty_count == 1);
    CHECK(reconstruct_fixed(failing, ex) == fixing);
}

TEST_CASE("derive_segment picks the hunk holding the error") {
    std::string failing;
    for (int i = 1; i <= 20; ++i) {
        failing += "int v" + std::to_string(i) + " = " + std::to_string(i) + ";\n";
    }
    auto lines = split_lines(failing);
    lines[2] = "int v3 = 300;";
    lines[14] = "int v15 = 1500;";
    const auto fixing = join_lines(lines) + "\n";

    const auto ex = derive_segment(failing, fixing, 15);
    CHECK(ex.faulty_first == 15);
    CHECK(ex.faulty_segment == "int v15 = 15;");
    CHECK(ex.fixed_segment == "int v15 = 1500;");
    CHECK(ex.hunk_count == 2);

    CHECK(derive_segment(failing, fixing, 4).faulty_first == 3);
}

TEST_CASE("derive_segment errors") {
    try {
        (void)derive_segment("a\nb\n", "a\nb\n", 1);
        FAIL("expected an error");
    } catch (const MiningError& e) {
        CHECK(e.code() == MiningErrc::files_identical);
    }
    try {
        (void)derive_segment("a\nint  x;\n", "a\nint x;\n", 2);
        FAIL("expected an error");
    } catch (const MiningError& e) {
        CHECK(e.code() == MiningErrc::whitespace_only);
    }
}

TEST_CASE("reconstruct handles insertions, deletions and empty lines") {
    const std::string failing = "a\nb\nc\n";
    for (const std::string fixing : {"a\nb\nX\nc\n", "a\nc\n", "a\n\nc\n", "a\nb\nc\nd\n", "Z\na\nb\nc\n"}) {
        const auto ex = derive_segment(failing, fixing, 2);
        CHECK(reconstruct_fixed(failing, ex) == fixing);
    }
}

namespace {

// Builds are stamped one minute apart in insertion order.
struct Fixture {
    testing::TempDir dir;
    ArchiveWriter writer{dir.path()};
    int minute = 0;

    void add(const std::string& id, Outcome o, const std::string& log, std::map<std::string, std::string> files) {
        writer.add(rec(id, o, minute++), log, files);
    }
};

}  // namespace

TEST_CASE("archive round-trip and validation") {
    Fixture f;
    f.add("b1", Outcome::fail, gcc_line("main.cpp", 2, "'x' was not declared in this scope"),
          {{"main.cpp", "int main() {\n  return x;\n}\n"}, {"lib/util.h", "#pragma once\n"}});
    f.add("b2", Outcome::pass, "", {{"main.cpp", "int main() {\n  return 0;\n}\n"}, {"lib/util.h", "#pragma once\n"}});

    const auto archive = Archive::load(f.dir.path());
    REQUIRE(archive.records().size() == 2);
    CHECK(archive.records()[0].build_id == "b1");
    CHECK(archive.get("b2").outcome == Outcome::pass);
    CHECK(archive.find("zz") == nullptr);
    CHECK_THROWS_AS((void)archive.get("zz"), ArchiveError);
    CHECK(archive.read_source(archive.get("b1"), "lib/util.h") == "#pragma once\n");
    CHECK_FALSE(archive.read_source(archive.get("b1"), "../../b2/src/main.cpp"));
    CHECK_FALSE(archive.read_source(archive.get("b1"), "/etc/passwd"));
    CHECK_FALSE(archive.read_source(archive.get("b1"), "nope.cpp"));
    CHECK(archive.read_log(archive.get("b1")).find("not declared") != std::string::npos);

    write_file((f.dir / "order.txt").string(), "b2\nb1\n");
    CHECK_THROWS_AS((void)Archive::load(f.dir.path()), ArchiveError);
    write_file((f.dir / "order.txt").string(), "b1\nb1\nb2\n");
    CHECK_THROWS_AS((void)Archive::load(f.dir.path()), ArchiveError);
    fs::remove(f.dir / "order.txt");
    CHECK_THROWS_AS((void)Archive::load(f.dir.path()), ArchiveError);
}

TEST_CASE("derive_fix_example over an archive") {
    Fixture f;
    f.add("b1", Outcome::fail, "", {{"a.cpp", "int a;\nint b = c;\n"}});
    f.add("b2", Outcome::pass, "", {{"a.cpp", "int a;\nint b = 0;\n"}});
    f.add("b3", Outcome::fail, "", {{"a.cpp", "int a;\n"}});
    f.add("b4", Outcome::pass, "", {{"b.cpp", "int a;\n"}});
    const auto archive = Archive::load(f.dir.path());

    const auto ex = derive_fix_example(archive, archive.get("b1"), archive.get("b2"),
                                       err("a.cpp", 2, "m", "undeclared-identifier"));
    CHECK(ex.category == "undeclared-identifier");
    CHECK(ex.failing_build == "b1");
    CHECK(ex.fixing_build == "b2");
    CHECK(ex.file == "a.cpp");
    CHECK(ex.fixed_segment == "int b = 0;");

    try {
        (void)derive_fix_example(archive, archive.get("b3"), archive.get("b4"), err("a.cpp", 1, "m"));
        FAIL("expected an error");
    } catch (const MiningError& e) {
        CHECK(e.code() == MiningErrc::file_missing);
    }
}

namespace {

void add_fix_pair(Fixture& f, const std::string& id, const std::string& file, const std::string& message) {
    const std::string before = "int keep;\nint broken_" + id + ";\nint tail;\n";
    const std::string after = "int keep;\nint fixed_" + id + ";\nint tail;\n";
    f.add(id + "-f", Outcome::fail, gcc_line(file, 2, message), {{file, before}});
    f.add(id + "-p", Outcome::pass, "", {{file, after}});
}

}  // namespace

TEST_CASE("mine_examples and catalog selection") {
    Fixture f;
    add_fix_pair(f, "m1", "a.cpp", "foo.h: No such file or directory");
    add_fix_pair(f, "m2", "b.cpp", "bar.h: No such file or directory");
    add_fix_pair(f, "m3", "c.cpp", "baz.h: No such file or directory");
    add_fix_pair(f, "r1", "d.cpp", "redefinition of 'int x'");
    f.add("dangling", Outcome::fail, gcc_line("e.cpp", 1, "stray '@' in program"), {{"e.cpp", "@\n"}});

    const auto archive = Archive::load(f.dir.path());
    const auto examples = mine_examples(archive, Taxonomy::builtin());
    CHECK(examples.size() == 4);
    for (const auto& ex : examples) {
        const auto failing = archive.read_source(archive.get(ex.failing_build), ex.file);
        const auto fixing = archive.read_source(archive.get(ex.fixing_build), ex.file);
        REQUIRE(failing);
        CHECK(reconstruct_fixed(*failing, ex) == *fixing);
    }

    const auto a = build_example_catalog(archive, Taxonomy::builtin(), 7);
    const auto b = build_example_catalog(archive, Taxonomy::builtin(), 7);
    CHECK(a == b);
    CHECK(a.size() == 2);
    CHECK(a.count("missing-include") == 1);
    CHECK(a.count("redefinition") == 1);

    std::set<std::string> chosen;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
        chosen.insert(build_example_catalog(archive, Taxonomy::builtin(), seed).at("missing-include").failing_build);
    }
    CHECK(chosen.size() == 3);

    const testing::TempDir out;
    save_catalog(out / "catalog.json", a, 7);
    CHECK(load_catalog(out / "catalog.json") == a);
}

TEST_CASE("catalog over five categories and over nothing") {
    Fixture f;
    add_fix_pair(f, "c1", "a.cpp", "foo.h: No such file or directory");
    add_fix_pair(f, "c2", "a.cpp", "redefinition of 'int x'");
    add_fix_pair(f, "c3", "a.cpp", "'struct P' has no member named 'z'");
    add_fix_pair(f, "c4", "a.cpp", "stray '@' in program");
    add_fix_pair(f, "c5", "a.cpp", "assignment of read-only variable 'k'");
    CHECK(build_example_catalog(Archive::load(f.dir.path()), Taxonomy::builtin(), 1).size() == 5);

    Fixture unresolved;
    unresolved.add("x", Outcome::fail, gcc_line("a.cpp", 1, "boom"), {{"a.cpp", "x\n"}});
    unresolved.add("y", Outcome::fail, gcc_line("a.cpp", 1, "boom"), {{"a.cpp", "y\n"}});
    CHECK(build_example_catalog(Archive::load(unresolved.dir.path()), Taxonomy::builtin(), 1).empty());

    const testing::TempDir empty;
    write_file((empty / "order.txt").string(), "");
    CHECK(build_example_catalog(Archive::load(empty.path()), Taxonomy::builtin(), 1).empty());
}

TEST_CASE("FixExample JSON round-trip") {
    const auto ex = derive_segment("a\nb\nc\n", "a\nB\nB2\nc\n", 2);
    CHECK(nlohmann::json(ex).get<FixExample>() == ex);
}
