#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("stvine_cli_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

struct Outcome {
    int code;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome run(const std::string& args) {
    const fs::path o = workdir() / "stdout.txt", e = workdir() / "stderr.txt";
    const std::string cmd = "cd '" + workdir().string() + "' && '" STVINE_CLI "' " + args + " > '" + o.string() +
                            "' 2> '" + e.string() + "'";
    const int st = std::system(cmd.c_str());
    return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, slurp(o), slurp(e)};
}

std::size_t count(const std::string& s, const std::string& what) {
    std::size_t n = 0;
    for (auto at = s.find(what); at != std::string::npos; at = s.find(what, at + 1)) ++n;
    return n;
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        ASSERT_EQ(run("simulate --out raw --stations 20 --times 56 --missing 0.02 --seed 5").code, 0);
        ASSERT_EQ(run("ingest --stations raw/stations.csv --observations raw/observations.csv --out data --daily").code, 0);
        ASSERT_EQ(run("simulate --out small --stations 12 --times 30 --seed 6").code, 0);
    }
    static void TearDownTestSuite() { fs::remove_all(workdir()); }
};

}  // namespace

TEST_F(Cli, HelpListsEveryCommandAndFlag) {
    const Outcome r = run("--help");
    EXPECT_EQ(r.code, 0);
    for (const char* s : {"ingest", "fit", "predict", "cv", "report", "simulate", "--config", "--seed", "--threads",
                          "--lags", "--impute-after-aggregation", "--covariates", "--bins"})
        EXPECT_NE(r.out.find(s), std::string::npos) << s;
    EXPECT_NE(run("cv --help").out.find("--models"), std::string::npos);
}

TEST_F(Cli, IngestWritesDatasetAndReport) {
    EXPECT_TRUE(fs::exists(workdir() / "data/observations.csv"));
    EXPECT_TRUE(fs::exists(workdir() / "data/missingness.csv"));
    EXPECT_EQ(slurp(workdir() / "data/observations.csv").find(",,"), std::string::npos);

    const Outcome weekly = run("ingest --stations raw/stations.csv --observations raw/observations.csv --out weekly "
                           "--impute-after-aggregation");
    EXPECT_EQ(weekly.code, 0) << weekly.err;
    EXPECT_EQ(count(slurp(workdir() / "weekly/observations.csv"), "\n"), 1u + 20u * 8u);
}

TEST_F(Cli, IngestErrors) {
    const Outcome missing = run("ingest --stations nowhere.csv --observations raw/observations.csv --out x");
    EXPECT_EQ(missing.code, 2);
    EXPECT_NE(missing.err.find("nowhere.csv"), std::string::npos);
    const Outcome empty = run("ingest --stations raw/stations.csv --observations raw/observations.csv --out x "
                          "--daily --max-missing-rate 0");
    EXPECT_EQ(empty.code, 3) << empty.err;
}

TEST_F(Cli, FitStructuralCounts) {
    Outcome r = run("fit --data data --out full.model");
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string full = slurp(workdir() / "full.model");
    EXPECT_NE(full.find("\nupper 45\n"), std::string::npos);
    EXPECT_NE(r.out.find("10 tree-1 edges, 45 upper-tree copulas"), std::string::npos);
    EXPECT_NE(r.out.find("lag 0"), std::string::npos);

    r = run("fit --data data --out pm25.model --covariates pm25");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(slurp(workdir() / "pm25.model").find("\nupper 28\n"), std::string::npos);

    r = run("fit --data data --out gauss.model --model-kind gaussian-vine");
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string g = slurp(workdir() / "gauss.model");
    const std::regex token(R"(^(?:proto \d+ \d+ |)([A-Za-z]+) -?\d+ \S+ \S+$)");
    std::istringstream lines(g.substr(g.find("\ndependent\n")));
    std::string line;
    std::size_t specs = 0;
    while (std::getline(lines, line)) {
        std::smatch m;
        if (!std::regex_match(line, m, token)) continue;
        ++specs;
        EXPECT_EQ(m[1], "Gaussian") << line;
    }
    EXPECT_EQ(specs, 3u * 2u * 10u + 45u);
}

TEST_F(Cli, FitFailureExitCode) {
    // two stations cannot supply tree-1 neighbors
    std::ofstream(workdir() / "tiny_st.csv") << "station_id,lon,lat\nA,127,37\nB,127.1,37\n";
    std::ofstream obs(workdir() / "tiny_obs.csv");
    obs << "station_id,time,pm10\n";
    for (const char* s : {"A", "B"})
        for (int t = 1; t <= 30; ++t) obs << s << ',' << t << ',' << 10 + (t * 7 + s[0]) % 13 << '\n';
    obs.close();
    ASSERT_EQ(run("ingest --stations tiny_st.csv --observations tiny_obs.csv --out tiny --daily").code, 0);
    const Outcome r = run("fit --data tiny --out tiny.model --covariates none");
    EXPECT_EQ(r.code, 4) << r.err;
    EXPECT_FALSE(fs::exists(workdir() / "tiny.model"));
}

TEST_F(Cli, PredictMatchesAcrossSaveAndLoad) {
    ASSERT_EQ(run("fit --data small --out small.model --bins 5").code, 0);
    const Outcome a = run("predict --data small --model small.model --station S4 --time 9 --levels 0.5");
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(count(a.out, "\n"), 2u);
    EXPECT_EQ(a.out.substr(0, a.out.find('\n')), "station,time,observed,mean,q025,q975,q0.5");
    EXPECT_EQ(run("predict --data small --model small.model --station S4 --time 9 --levels 0.5").out, a.out);
    EXPECT_EQ(run("predict --data small --model small.model --station S4 --time 1").code, 4);
    EXPECT_EQ(run("predict --data small --model absent.model").code, 2);
}

TEST_F(Cli, CrossValidationIsDeterministic) {
    const std::string cmd = "cv --data small --models vine,kriging --bins 5 --seed 7 --folds 10 --out ";
    const Outcome a = run(cmd + "cv_a");
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(run(cmd + "cv_b --threads 2").code, 0);
    for (const char* f : {"fold_metrics.csv", "predictions_vine.csv", "predictions_kriging.csv", "variograms.csv",
                          "families.csv", "summary.txt"})
        EXPECT_EQ(slurp(workdir() / "cv_a" / f), slurp(workdir() / "cv_b" / f)) << f;
    const std::string metrics = slurp(workdir() / "cv_a/fold_metrics.csv");
    EXPECT_EQ(count(metrics, "\nvine,gumbel,"), 10u);
    EXPECT_EQ(count(metrics, "\nkriging,gumbel,"), 10u);
    // accuracy with the extreme subset in parentheses
    EXPECT_TRUE(std::regex_search(a.out, std::regex(R"(vine\s+gumbel\s+\d+\.\d\d \(\d+\.\d\d\))")));
}

TEST_F(Cli, ConfigFileWithFlagPrecedence) {
    std::ofstream(workdir() / "run.cfg") << "seed=7\nbins=5\nfolds=10\n";
    ASSERT_EQ(run("--config run.cfg cv --data small --models kriging --out cfg_a").code, 0);
    ASSERT_EQ(run("cv --data small --models kriging --seed 7 --bins 5 --out cfg_b").code, 0);
    EXPECT_EQ(slurp(workdir() / "cfg_a/variograms.csv"), slurp(workdir() / "cfg_b/variograms.csv"));
    const Outcome over = run("--config run.cfg cv --data small --models kriging --bins 4 --out cfg_c");
    ASSERT_EQ(over.code, 0) << over.err;
    const Outcome ref = run("cv --data small --models kriging --seed 7 --bins 4 --out cfg_d");
    EXPECT_EQ(slurp(workdir() / "cfg_c/variograms.csv"), slurp(workdir() / "cfg_d/variograms.csv"));
    EXPECT_NE(slurp(workdir() / "cfg_c/variograms.csv"), slurp(workdir() / "cfg_a/variograms.csv"));
}

TEST_F(Cli, ReportPlotsAndTables) {
    ASSERT_EQ(run("fit --data small --out rep.model --bins 5").code, 0);
    ASSERT_EQ(run("cv --data small --models vine --bins 5 --out rep_cv").code, 0);
    const Outcome r = run("report --model rep.model --cv-dir rep_cv --out rep");
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string svg = slurp(workdir() / "rep/correlogram_dependent.svg");
    EXPECT_EQ(count(svg, "<polyline"), 2u);
    const auto lag0 = svg.find("class=\"lag0\""), lag1 = svg.find("class=\"lag1\"");
    ASSERT_NE(lag0, std::string::npos);
    ASSERT_NE(lag1, std::string::npos);
    EXPECT_EQ(svg.substr(lag0, svg.find("/>", lag0) - lag0).find("dasharray"), std::string::npos);
    EXPECT_NE(svg.substr(lag1, svg.find("/>", lag1) - lag1).find("dasharray"), std::string::npos);

    // most frequent family first, counts over 10 folds
    std::istringstream freq(slurp(workdir() / "rep/family_frequency.csv"));
    std::string line;
    std::getline(freq, line);
    std::size_t rows = 0;
    const std::regex tally(R"(:(\d+))");
    while (std::getline(freq, line)) {
        ++rows;
        int prev = 1 << 30, total = 0;
        const std::string fams = line.substr(line.rfind(',') + 1);
        for (auto it = std::sregex_iterator(fams.begin(), fams.end(), tally);
             it != std::sregex_iterator(); ++it) {
            const int c = std::stoi((*it)[1]);
            EXPECT_LE(c, prev) << line;
            prev = c;
            total += c;
        }
        EXPECT_EQ(total, 10) << line;
    }
    EXPECT_EQ(rows, 3u * 2u * 5u);
    EXPECT_NE(slurp(workdir() / "rep/coverage.csv").find("\nvine,"), std::string::npos);

    fs::create_directories(workdir() / "empty");
    EXPECT_EQ(run("report --cv-dir empty --out rep2").code, 6);
    EXPECT_EQ(run("report --model absent.model --out rep2").code, 6);
}
