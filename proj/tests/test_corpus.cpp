#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "json.hpp"
#include "u2g/corpus.hpp"
#include "u2g/error.hpp"

using namespace u2g;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& body) {
        static int counter = 0;
        path = "corpus_test_" + std::to_string(counter++) + ".csv";
        std::ofstream out(path, std::ios::binary);
        out << body;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

const std::map<std::string, int> kBinary{{"benign", 0}, {"malicious", 1}};

Dataset make_dataset(std::size_t benign, std::size_t malicious) {
    Dataset ds;
    ds.class_names = {"benign", "malicious"};
    for (std::size_t i = 0; i < benign; ++i)
        ds.records.push_back({"http://site" + std::to_string(i) + ".com", 0});
    for (std::size_t i = 0; i < malicious; ++i)
        ds.records.push_back({"http://bad" + std::to_string(i) + ".xyz/login", 1});
    return ds;
}

}  // namespace

TEST_CASE("load_csv maps rows in file order") {
    TempFile f("url,label\nhttp://a.com,benign\nhttp://b.xyz/login.php,malicious\n");
    Dataset ds = load_csv(f.path, kBinary);
    REQUIRE(ds.size() == 2);
    CHECK(ds.records[0].url == "http://a.com");
    CHECK(ds.records[0].label == 0);
    CHECK(ds.records[1].url == "http://b.xyz/login.php");
    CHECK(ds.records[1].label == 1);
    CHECK(ds.class_names[0] == "benign");
    CHECK(ds.class_names[1] == "malicious");
}

TEST_CASE("load_csv header-only file is an error") {
    TempFile f("url,label\n");
    CHECK_THROWS_AS(load_csv(f.path, kBinary), FormatError);
}

TEST_CASE("load_csv unmapped label reports the row") {
    TempFile f("url,label\nhttp://a.com,benign\nhttp://p.com,phish\n");
    try {
        load_csv(f.path, kBinary);
        FAIL("expected LabelError");
    } catch (const LabelError& e) {
        CHECK(std::string(e.what()).find("3") != std::string::npos);  // row 3
        CHECK(std::string(e.what()).find("phish") != std::string::npos);
    }
    LoadReport rep;
    Dataset ds = load_csv(f.path, kBinary, /*skip_invalid=*/true, &rep);
    CHECK(ds.size() == 1);
    CHECK(rep.rows_read == 2);
    CHECK(rep.rows_skipped == 1);
}

TEST_CASE("load_csv requires url and label columns") {
    TempFile f("address,class\nhttp://a.com,benign\n");
    CHECK_THROWS_AS(load_csv(f.path, kBinary), FormatError);
}

TEST_CASE("load_csv handles quoting, CRLF, extra columns, case") {
    TempFile f("id,URL,Label\r\n1,\"http://a.com/x,y\",benign\r\n2,\"say \"\"hi\"\"\",malicious\r\n");
    Dataset ds = load_csv(f.path, kBinary);
    REQUIRE(ds.size() == 2);
    CHECK(ds.records[0].url == "http://a.com/x,y");
    CHECK(ds.records[1].url == "say \"hi\"");
}

TEST_CASE("csv round-trip is identity on (url, label)") {
    Dataset ds = make_dataset(7, 5);
    ds.records.push_back({"http://comma.com/a,b", 0});
    TempFile f("");  // placeholder path
    write_csv(ds, f.path);
    Dataset back = load_csv(f.path, kBinary);
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.records[i].url == ds.records[i].url);
        CHECK(back.records[i].label == ds.records[i].label);
    }
}

TEST_CASE("scan_labels assigns sorted ids") {
    TempFile f("url,label\nhttp://a.com,malicious\nhttp://b.com,benign\nhttp://c.com,benign\n");
    auto map = scan_labels(f.path);
    REQUIRE(map.size() == 2);
    CHECK(map.at("benign") == 0);
    CHECK(map.at("malicious") == 1);
}

TEST_CASE("split produces stratified sizes 80/10/10 on a 50/50 corpus") {
    Dataset ds = make_dataset(50, 50);
    auto [tr, va, te] = split(ds, {0.8, 0.1, 0.1, 7});
    CHECK(tr.size() == 80);
    CHECK(va.size() == 10);
    CHECK(te.size() == 10);
    for (const Dataset* part : {&tr, &va, &te}) {
        std::int64_t pos = 0;
        for (const auto& r : part->records) pos += r.label;
        CHECK(std::abs(2 * pos - static_cast<std::int64_t>(part->size())) <= 2);
    }
}

TEST_CASE("split is deterministic and a partition") {
    Dataset ds = make_dataset(33, 21);
    auto [a1, b1, c1] = split(ds, {0.6, 0.2, 0.2, 99});
    auto [a2, b2, c2] = split(ds, {0.6, 0.2, 0.2, 99});
    CHECK(a1.size() == a2.size());
    for (std::size_t i = 0; i < a1.size(); ++i)
        CHECK(a1.records[i].url == a2.records[i].url);

    std::multiset<std::string> all;
    for (const Dataset* part : {&a1, &b1, &c1})
        for (const auto& r : part->records) all.insert(r.url);
    CHECK(all.size() == ds.size());
    std::multiset<std::string> orig;
    for (const auto& r : ds.records) orig.insert(r.url);
    CHECK(all == orig);
}

TEST_CASE("split 30/5/65 on 1000 records") {
    Dataset ds = make_dataset(500, 500);
    auto [tr, va, te] = split(ds, {0.30, 0.05, 0.65, 3});
    CHECK(tr.size() == 300);
    CHECK(va.size() == 50);
    CHECK(te.size() == 650);
}

TEST_CASE("split rejects fraction sums above one") {
    Dataset ds = make_dataset(4, 4);
    CHECK_THROWS_AS(split(ds, {0.8, 0.3, 0.1, 0}), SpecError);
    CHECK_THROWS_AS(split(Dataset{}, {0.8, 0.1, 0.1, 0}), SpecError);
}

TEST_CASE("filter_short keeps strictly shorter URLs, preserves order") {
    Dataset ds;
    ds.class_names = {"benign"};
    ds.records = {{std::string(39, 'a'), 0}, {std::string(40, 'b'), 0},
                  {std::string(41, 'c'), 0}};
    Dataset kept = filter_short(ds, 40);
    REQUIRE(kept.size() == 1);
    CHECK(kept.records[0].url.size() == 39);

    CHECK(filter_short(ds, 1).empty());
    CHECK(filter_short(ds, 1000000000).size() == 3);

    Dataset twice = filter_short(filter_short(ds, 41), 41);
    CHECK(twice.size() == filter_short(ds, 41).size());
}

TEST_CASE("class_stats counts, ratio, histogram") {
    Dataset ds = make_dataset(6, 2);
    ClassStats st = class_stats(ds);
    REQUIRE(st.counts.size() == 2);
    CHECK(st.counts[0] == 6);
    CHECK(st.counts[1] == 2);
    CHECK(st.imbalance_ratio == doctest::Approx(3.0));
    CHECK_FALSE(st.imbalance_infinite);

    std::int64_t total = 0;
    for (const auto& h : st.length_histogram)
        for (auto c : h) total += c;
    CHECK(total == static_cast<std::int64_t>(ds.size()));
}

TEST_CASE("class_stats imbalance matches the 1:43 regime") {
    Dataset ds;
    ds.class_names = {"benign", "malicious"};
    // scaled-down proportions of 1,526,619 : 35,315
    for (int i = 0; i < 15266; ++i) ds.records.push_back({"http://b.com/" + std::to_string(i), 0});
    for (int i = 0; i < 353; ++i) ds.records.push_back({"http://m.com/" + std::to_string(i), 1});
    ClassStats st = class_stats(ds);
    CHECK(st.imbalance_ratio == doctest::Approx(43.0).epsilon(0.01));
}

TEST_CASE("class_stats single-class dataset uses the infinity marker") {
    Dataset ds = make_dataset(3, 0);
    ClassStats st = class_stats(ds);
    CHECK(st.imbalance_infinite);

    std::string json = stats_to_json(ds, st);
    auto j = nlohmann::json::parse(json);
    CHECK(j.at("imbalance_ratio") == "inf");
    CHECK(j.at("classes").at("benign") == 3);
    CHECK(j.contains("length_histogram"));
}
