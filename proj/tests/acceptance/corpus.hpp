#pragma once

#include "shadowfix/shadow.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace shadowfix::acceptance {

namespace fs = std::filesystem;

/// One fixture project under tests/fixtures/corpus/<name>/: broken/ and
/// fixed/ source trees, the canned compiler log of broken/, and the
/// category its first error should land in.
struct CorpusCase {
    std::string name;
    fs::path broken;
    fs::path fixed;
    std::string canned_log;
    std::string category;
};

[[nodiscard]] std::vector<CorpusCase> load_corpus(const fs::path& root);

enum class CIMode { compiler, scripted };

[[nodiscard]] shadow::CIConfig corpus_ci(CIMode mode);

/// Whether `g++` runs here.
[[nodiscard]] bool have_compiler();

struct CorpusRun {
    std::size_t cases = 0;
    std::size_t categories = 0;
    std::size_t passed_first_try = 0;
    double seconds = 0;
    /// Empty when every step behaved.
    std::vector<std::string> problems;
};

/// Builds an archive from the corpus (failing build then fixing build per
/// case), writes a replay fixture holding each case's ground-truth fix for
/// the first prompt, and runs `shadowfix repair` over every failing build.
[[nodiscard]] CorpusRun run_corpus(const std::vector<CorpusCase>& corpus, CIMode mode, const fs::path& work);

}  // namespace shadowfix::acceptance
