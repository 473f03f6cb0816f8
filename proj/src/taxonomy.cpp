#include "shadowfix/diagnostics.hpp"
#include "shadowfix/text.hpp"

#include <set>

namespace shadowfix::diagnostics {

namespace {

// Ordered by matching priority: narrower phrasings ("too many arguments ...
// macro", "template arguments") must precede the broader ones they overlap.
constexpr const char* kBuiltinTaxonomy = R"json({
  "categories": [
    {"id": "missing-include", "description": "Included header cannot be found",
     "dependency_related": true,
     "patterns": ["No such file or directory", "file not found"]},
    {"id": "unhandled-enum", "description": "Enumeration value not handled (static check)",
     "dependency_related": true,
     "patterns": ["enumeration values? .* not handled", "not handled in switch", "not all enum", "non-exhaustive"]},
    {"id": "macro-error", "description": "Macro invocation or preprocessor directive error",
     "dependency_related": false,
     "patterns": ["\\bmacro\\b", "#error", "unterminated conditional directive", "invalid preprocessing directive"]},
    {"id": "template-error", "description": "Template argument or instantiation error",
     "dependency_related": false,
     "patterns": ["template argument", "in instantiation of", "is not a template", "template parameter"]},
    {"id": "undeclared-identifier", "description": "Use of an identifier that is not declared",
     "dependency_related": true,
     "patterns": ["use of undeclared identifier", "was not declared in this scope", "undeclared \\(first use",
                  "unknown type name", "does not name a type", "has not been declared"]},
    {"id": "undefined-reference", "description": "Symbol referenced but not defined at link time",
     "dependency_related": true,
     "patterns": ["undefined reference to", "undefined symbol"]},
    {"id": "redefinition", "description": "Symbol defined or declared more than once",
     "dependency_related": false,
     "patterns": ["redefinition of", "conflicting declaration", "multiple definition of", "redeclared as"]},
    {"id": "member-not-found", "description": "Access to a member that does not exist",
     "dependency_related": true,
     "patterns": ["has no member named", "no member named", "is not a member of"]},
    {"id": "signature-mismatch", "description": "Call does not match any declared signature",
     "dependency_related": true,
     "patterns": ["no matching (member )?function for call", "too (few|many) arguments to function",
                  "too (few|many) arguments to", "candidate function not viable"]},
    {"id": "const-violation", "description": "Modification through a const-qualified entity",
     "dependency_related": false,
     "patterns": ["read-only", "discards qualifiers", "const-qualified type", "discards 'const'"]},
    {"id": "type-mismatch", "description": "Incompatible types in conversion or initialization",
     "dependency_related": true,
     "patterns": ["cannot convert", "invalid conversion", "incompatible (pointer )?type", "no viable conversion",
                  "cannot initialize", "invalid operands"]},
    {"id": "syntax-error", "description": "Malformed source text",
     "dependency_related": false,
     "patterns": ["^expected ", "\\bstray\\b", "missing terminating", "unterminated", "expected unqualified-id"]},
    {"id": "static-check", "description": "Violation reported by a static checker",
     "dependency_related": true,
     "applies_to": "static-check", "patterns": []},
    {"id": "other", "description": "Anything not matched above",
     "dependency_related": false,
     "catch_all": true, "patterns": []}
  ]
})json";

}  // namespace

Taxonomy::Taxonomy(std::vector<ErrorCategory> categories) : categories_(std::move(categories)) {
    if (categories_.empty()) {
        throw TaxonomyError("taxonomy is empty");
    }
    std::set<std::string> ids;
    std::optional<std::size_t> catch_all;
    compiled_.reserve(categories_.size());
    for (std::size_t i = 0; i < categories_.size(); ++i) {
        const auto& c = categories_[i];
        if (c.id.empty()) {
            throw TaxonomyError("category with empty id");
        }
        if (!ids.insert(c.id).second) {
            throw TaxonomyError("duplicate category id '" + c.id + "'");
        }
        if (c.catch_all) {
            if (catch_all) {
                throw TaxonomyError("more than one catch-all category");
            }
            catch_all = i;
        } else if (c.patterns.empty() && !c.applies_to) {
            throw TaxonomyError("category '" + c.id + "' has neither patterns nor a severity scope");
        }
        auto& regexes = compiled_.emplace_back();
        for (const auto& p : c.patterns) {
            try {
                regexes.emplace_back(p, std::regex::ECMAScript | std::regex::optimize);
            } catch (const std::regex_error& e) {
                throw TaxonomyError("category '" + c.id + "': bad pattern '" + p + "': " + e.what());
            }
        }
    }
    if (!catch_all) {
        throw TaxonomyError("taxonomy has no catch-all category");
    }
    catch_all_ = *catch_all;
}

const Taxonomy& Taxonomy::builtin() {
    static const Taxonomy taxonomy = from_json(nlohmann::json::parse(kBuiltinTaxonomy));
    return taxonomy;
}

Taxonomy Taxonomy::from_json(const nlohmann::json& j) {
    std::vector<ErrorCategory> categories;
    try {
        for (const auto& item : j.at("categories")) {
            ErrorCategory c;
            c.id = item.at("id").get<std::string>();
            c.description = item.value("description", "");
            c.dependency_related = item.value("dependency_related", false);
            c.patterns = item.value("patterns", std::vector<std::string>{});
            c.catch_all = item.value("catch_all", false);
            if (item.contains("applies_to")) {
                const auto s = item.at("applies_to").get<std::string>();
                c.applies_to = parse_severity(s);
                if (!c.applies_to) {
                    throw TaxonomyError("category '" + c.id + "': unknown severity '" + s + "'");
                }
            }
            categories.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw TaxonomyError(std::string("malformed taxonomy: ") + e.what());
    }
    return Taxonomy(std::move(categories));
}

Taxonomy Taxonomy::load(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw TaxonomyError(path + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json Taxonomy::to_json() const {
    auto list = nlohmann::json::array();
    for (const auto& c : categories_) {
        nlohmann::json item{{"id", c.id},
                            {"description", c.description},
                            {"dependency_related", c.dependency_related},
                            {"patterns", c.patterns}};
        if (c.applies_to) {
            item["applies_to"] = std::string(to_string(*c.applies_to));
        }
        if (c.catch_all) {
            item["catch_all"] = true;
        }
        list.push_back(std::move(item));
    }
    return {{"categories", std::move(list)}};
}

const ErrorCategory* Taxonomy::find(std::string_view id) const noexcept {
    for (const auto& c : categories_) {
        if (c.id == id) {
            return &c;
        }
    }
    return nullptr;
}

const ErrorCategory& Taxonomy::categorize(const CompileError& error) const {
    for (std::size_t i = 0; i < categories_.size(); ++i) {
        const auto& c = categories_[i];
        if (c.catch_all || (c.applies_to && *c.applies_to != error.severity)) {
            continue;
        }
        if (c.patterns.empty()) {
            return c;
        }
        for (const auto& re : compiled_[i]) {
            if (std::regex_search(error.message, re)) {
                return c;
            }
        }
    }
    return catch_all();
}

const ErrorCategory& categorize(const CompileError& error, const Taxonomy& taxonomy) {
    return taxonomy.categorize(error);
}

}  // namespace shadowfix::diagnostics
