#include "support.hpp"

#include "cobra/cli.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

struct Result
{
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args)
{
    args.insert(args.begin(), "cobra");
    std::vector<const char *> argv;
    for (auto &a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = cobra::cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string sample(const std::string &name) { return testing::source_path("samples/" + name + ".cob"); }
std::string catalog(const std::string &name) { return testing::source_path("catalogs/" + name + ".json"); }

}

TEST_CASE("optimize prints a program and explains on stderr")
{
    auto r = run({"optimize", sample("p0"), "--catalog", catalog("slow-remote"), "--explain"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("fn processOrders") != std::string::npos);
    CHECK(r.err.find("plan cost") != std::string::npos);
    CHECK(r.out.find("plan cost") == std::string::npos);
    auto again = cobra::parse(r.out);
    CHECK(again.functions.size() == 1);
}

TEST_CASE("optimize is deterministic and self-checks")
{
    auto a = run({"optimize", sample("m0"), "--catalog", catalog("slow-remote"), "--self-check"});
    auto b = run({"optimize", sample("m0"), "--catalog", catalog("slow-remote"), "--self-check"});
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
}

TEST_CASE("rule subsets, tracing and the legacy flag")
{
    auto traced = run({"optimize", sample("fold_select"), "--catalog", catalog("slow-remote"), "--rules", "T2,N2",
                       "--trace-rules"});
    CHECK(traced.code == 0);
    CHECK(traced.err.find("rule=T2") != std::string::npos);

    auto legacy = run({"optimize", sample("m0"), "--catalog", catalog("slow-remote"), "--legacy-fold-precondition",
                       "--trace-rules"});
    CHECK(legacy.code == 0);
    CHECK(legacy.err.find("rule=loopToFold") == std::string::npos);

    auto bad = run({"optimize", sample("m0"), "--catalog", catalog("slow-remote"), "--rules", "X9"});
    CHECK(bad.code == 1);
}

TEST_CASE("user errors exit with one")
{
    auto missing = run({"optimize", "/nonexistent.cob", "--catalog", catalog("slow-remote")});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("error:") != std::string::npos);
    CHECK(run({"optimize", sample("p0")}).code == 1);
    CHECK(run({"bogus"}).code == 1);
    CHECK(run({"optimize", sample("p0"), "--catalog", catalog("slow-remote"), "--af", "0.5"}).code == 1);
}

TEST_CASE("dump commands")
{
    auto dot = std::filesystem::temp_directory_path() / "cobra_cli_test.dot";
    auto dag = run({"dump-dag", sample("p0"), "--catalog", catalog("slow-remote"), "--emit-dot", dot.string()});
    CHECK(dag.code == 0);
    CHECK(dag.out.find("L3-7") != std::string::npos);
    std::ifstream f(dot);
    std::string first;
    std::getline(f, first);
    CHECK(first.rfind("digraph", 0) == 0);
    f.close();
    std::filesystem::remove(dot);

    auto regions = run({"dump-regions", sample("p0")});
    CHECK(regions.code == 0);
    CHECK(regions.out.find("L3-7") != std::string::npos);

    auto version = run({"--version"});
    CHECK(version.code == 0);
    CHECK(version.out.find("cobra") != std::string::npos);
}

TEST_CASE("run executes a program against a database file")
{
    auto path = std::filesystem::temp_directory_path() / "cobra_cli_test_db.json";
    {
        std::ofstream f(path);
        f << R"({"sales": {"schema": ["month", "sale_amt"], "rows": [[1, 10], [2, 5]]}})";
    }
    auto r = run({"run", sample("m0"), "--db", path.string()});
    std::filesystem::remove(path);
    CHECK(r.code == 0);
    CHECK(r.out.find("15") != std::string::npos);
}
