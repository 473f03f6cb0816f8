#include "shadowfix/prompting.hpp"

#include "enum_check.hpp"

#include <doctest.h>

using namespace shadowfix;
using namespace shadowfix::prompting;

namespace {

using K = InputKind;

PromptInputs enum_check_inputs() {
    PromptInputs in;
    in.target_file = "src/db.cpp";
    in.source = testing::kEnumCheckBug;
    diagnostics::CompileError e;
    e.file = "src/db.cpp";
    e.line = 2;
    e.message = "enumeration value 'TYPE_I' not handled in switch";
    e.category = "unhandled-enum";
    e.raw = "src/db.cpp:2:5: error: enumeration value 'TYPE_I' not handled in switch";
    in.errors = {e};
    in.log_excerpt = e.raw;
    in.snippets = {patching::extract_snippet(in.source, e)};
    fixmine::FixExample ex;
    ex.category = "unhandled-enum";
    ex.faulty_segment = "    if (kind == Kind::A)";
    ex.fixed_segment = "    if ((kind == Kind::A) || (kind == Kind::B))";
    ex.file = "src/other.cpp";
    in.example = ex;
    in.target_lines = LineRange{2, 2};
    return in;
}

std::string numbered_source(std::size_t n) {
    std::string s;
    for (std::size_t i = 1; i <= n; ++i) {
        s += "int value_" + std::to_string(i) + " = compute(" + std::to_string(i) + ", alpha, beta, gamma);\n";
    }
    return s;
}

}  // namespace

TEST_CASE("recipe table") {
    CHECK(recipe_inputs(6) == std::set{K::error_log, K::erroneous_snippet, K::human_fix_example});
    CHECK(recipe_inputs(0) == std::set{K::full_source});
    CHECK(recipe_inputs(3) == std::set{K::error_log, K::erroneous_snippet});
    CHECK(recipe_inputs(1) == std::set{K::error_log});
    CHECK(recipe_inputs(2) == std::set{K::erroneous_snippet});
    CHECK(recipe_inputs(4) == std::set{K::erroneous_snippet, K::human_fix_example});
    CHECK(recipe_inputs(5) == std::set{K::error_log, K::human_fix_example});
    for (int n : {-1, 7, 100}) {
        try {
            (void)recipe_inputs(n);
            FAIL("expected an error");
        } catch (const PromptError& e) {
            CHECK(e.code() == PromptErrc::unknown_recipe);
        }
    }
}

TEST_CASE("no recipe is the fix example alone") {
    for (int n = 0; n < kRecipeCount; ++n) {
        CHECK(recipe_inputs(n) != std::set{K::human_fix_example});
    }
}

TEST_CASE("recipe 6 renders three data sections in order") {
    const auto p = assemble(recipe(6), enum_check_inputs());
    CHECK(count_data_sections(p) == 3);
    const auto instr = p.text.find("### INSTRUCTION");
    const auto log = p.text.find("### ERROR LOG");
    const auto code = p.text.find("### ERRONEOUS CODE");
    const auto example = p.text.find("### HUMAN FIX EXAMPLE");
    const auto target = p.text.find("### REPLACEMENT TARGET");
    CHECK(instr == 0);
    CHECK(instr < log);
    CHECK(log < code);
    CHECK(code < example);
    CHECK(example < target);
    CHECK(p.text.find("### FULL SOURCE FILE") == std::string::npos);
    CHECK(p.text.find("if (type == ObjectType::TYPE_II)") != std::string::npos);
    CHECK(p.text.find("// src/db.cpp lines 1-4 (error at line 2)") != std::string::npos);
    CHECK(p.text.find("Replace line(s) 2 of src/db.cpp.") != std::string::npos);
}

TEST_CASE("recipe 0 embeds the whole file verbatim") {
    auto in = enum_check_inputs();
    in.source = numbered_source(10);
    const auto p = assemble(recipe(0), in);
    CHECK(count_data_sections(p) == 1);
    CHECK(p.text.find("### FULL SOURCE FILE\n" + in.source) != std::string::npos);
}

TEST_CASE("section count equals recipe size for every recipe") {
    for (int n = 0; n < kRecipeCount; ++n) {
        const auto p = assemble(recipe(n), enum_check_inputs());
        CHECK(count_data_sections(p) == recipe_inputs(n).size());
    }
}

TEST_CASE("missing inputs") {
    auto no_example = enum_check_inputs();
    no_example.example.reset();
    try {
        (void)assemble(recipe(4), no_example);
        FAIL("expected an error");
    } catch (const PromptError& e) {
        CHECK(e.code() == PromptErrc::missing_input);
    }
    auto no_log = enum_check_inputs();
    no_log.log_excerpt = "  \n";
    CHECK_THROWS_AS((void)assemble(recipe(1), no_log), PromptError);
    auto no_snippet = enum_check_inputs();
    no_snippet.snippets.clear();
    CHECK_THROWS_AS((void)assemble(recipe(2), no_snippet), PromptError);
    auto no_source = enum_check_inputs();
    no_source.source.clear();
    CHECK_THROWS_AS((void)assemble(recipe(0), no_source), PromptError);
    CHECK_NOTHROW((void)assemble(recipe(3), no_example));
}

TEST_CASE("assembly is byte-deterministic") {
    for (int n = 0; n < kRecipeCount; ++n) {
        const auto a = assemble(recipe(n), enum_check_inputs());
        const auto b = assemble(recipe(n), enum_check_inputs());
        CHECK(a.text == b.text);
        CHECK(prompt_digest(a) == prompt_digest(b));
        CHECK(prompt_digest(a) == sha256_hex(a.text));
    }
}

TEST_CASE("token budget") {
    const auto small = assemble(recipe(6), enum_check_inputs());
    const auto ok = token_budget_check(small, 4096);
    CHECK_FALSE(ok.truncated);
    CHECK(ok.prompt.text == small.text);

    auto big = enum_check_inputs();
    big.source = numbered_source(1450);
    auto& e = big.errors.front();
    e.line = 700;
    big.target_lines = LineRange{700, 701};
    const auto p = assemble(recipe(0), big);
    REQUIRE(count_tokens(p.text) > 10000);
    const auto cut = token_budget_check(p, 2000);
    CHECK(cut.truncated);
    CHECK(count_tokens(cut.prompt.text) <= 2000);
    REQUIRE(cut.prompt.truncation.source_radius);
    const auto lines = split_lines(big.source);
    CHECK(cut.prompt.text.find(lines[699]) != std::string::npos);
    CHECK(cut.prompt.text.find(lines[700]) != std::string::npos);
    CHECK(cut.prompt.text.find(lines[0]) == std::string::npos);
    CHECK(cut.prompt.text.find("omitted") != std::string::npos);

    try {
        (void)token_budget_check(small, 5);
        FAIL("expected an error");
    } catch (const PromptError& err) {
        CHECK(err.code() == PromptErrc::budget_impossible);
    }
    CHECK_THROWS_AS((void)token_budget_check(small, 0), std::invalid_argument);
}

TEST_CASE("long logs are shortened, snippets kept") {
    auto in = enum_check_inputs();
    std::string log;
    for (int i = 0; i < 400; ++i) {
        log += "note: while compiling translation unit number " + std::to_string(i) + " of many\n";
    }
    in.log_excerpt = in.errors.front().raw + "\n" + log;
    const auto p = assemble(recipe(3), in);
    const auto cut = token_budget_check(p, 600);
    CHECK(cut.truncated);
    CHECK(cut.prompt.truncation.log_lines);
    CHECK(count_tokens(cut.prompt.text) <= 600);
    CHECK(cut.prompt.text.find(in.errors.front().raw) != std::string::npos);
    CHECK(cut.prompt.text.find("if (type == ObjectType::TYPE_II)") != std::string::npos);
}

TEST_CASE("templates") {
    const auto file = PromptTemplate::load(std::string(SHADOWFIX_DATA_DIR) + "/prompt_template.txt");
    CHECK(file.body() == PromptTemplate::builtin().body());
    for (auto k : kAllInputKinds) {
        CHECK(file.label(k) == PromptTemplate::builtin().label(k));
    }

    const auto custom = PromptTemplate::parse(
        "%label error_log == LOG ==\n"
        "Fix {{target_file}}.\n"
        "{{full_source}}{{error_log}}{{erroneous_snippet}}{{human_fix_example}}{{target}}\n");
    CHECK(custom.label(K::error_log) == "== LOG ==");
    CHECK(custom.label(K::full_source) == "### FULL SOURCE FILE");
    const auto p = assemble(recipe(1), enum_check_inputs(), custom);
    CHECK(p.text.rfind("Fix src/db.cpp.\n== LOG ==\n", 0) == 0);
    CHECK(count_data_sections(p) == 1);

    for (const char* bad : {"{{nope}}", "%label wrong X\n{{target}}", "{{target}} {{error_log}}", "{{unclosed"}) {
        try {
            (void)PromptTemplate::parse(bad);
            FAIL("expected an error for " << bad);
        } catch (const PromptError& e) {
            CHECK(e.code() == PromptErrc::bad_template);
        }
    }
}
