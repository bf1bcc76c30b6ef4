//! Statement corpora for the safety gate.

#![allow(dead_code)]

/// Statements that must never reach the database.
pub const DESTRUCTIVE: &[&str] = &[
    "DELETE FROM articles",
    "delete from performance_records where 1=1",
    "DeLeTe FrOm synthesis_records",
    "DROP TABLE articles",
    "drop table if exists performance_records",
    "DROP VIEW v",
    "DROP INDEX idx_articles_doi",
    "DROP TRIGGER t",
    "TRUNCATE TABLE articles",
    "UPDATE performance_records SET value = '0'",
    "update articles set title = null",
    "UpDaTe synthesis_records SET reagents = ''",
    "INSERT INTO articles (doi_or_title) VALUES ('x')",
    "INSERT INTO articles SELECT * FROM articles",
    "INSERT INTO articles (doi_or_title) VALUES ('x') ON CONFLICT DO NOTHING",
    "REPLACE INTO articles (doi_or_title) VALUES ('x')",
    "INSERT OR REPLACE INTO articles (doi_or_title) VALUES ('x')",
    "ALTER TABLE articles ADD COLUMN x TEXT",
    "ALTER TABLE articles RENAME TO old_articles",
    "CREATE TABLE x (a TEXT)",
    "CREATE INDEX i ON articles(title)",
    "CREATE VIEW v AS SELECT 1",
    "CREATE TRIGGER t AFTER INSERT ON articles BEGIN DELETE FROM articles; END",
    "GRANT SELECT ON articles TO bob",
    "SELECT 1; DROP TABLE articles",
    "SELECT * FROM articles; DELETE FROM articles",
    "SELECT 1;DELETE FROM articles;",
    "SELECT 1 /* ; */ ; DROP TABLE articles",
    "/* read only */ DELETE FROM articles",
    "-- just a read\nDELETE FROM articles",
    "DEL/**/ETE FROM articles",
    "SELECT * FROM articles -- harmless\n; UPDATE articles SET title = 'x'",
    "SELECT * FROM articles INTO OUTFILE '/tmp/x'",
    "SELECT * INTO DUMPFILE '/tmp/x' FROM articles",
    "SELECT * INTO backup FROM articles",
    "ATTACH DATABASE '/tmp/x.db' AS x",
    "DETACH DATABASE x",
    "VACUUM",
    "VACUUM INTO '/tmp/copy.db'",
    "PRAGMA writable_schema = 1",
    "PRAGMA foreign_keys = 0",
    "REINDEX",
    "WITH x AS (SELECT 1) DELETE FROM articles",
    "WITH x AS (SELECT 1) UPDATE articles SET title = 'x'",
    "WITH x AS (SELECT 'y') INSERT INTO articles (doi_or_title) SELECT * FROM x",
    "SELECT load_extension('evil.so')",
    "SELECT writefile('/tmp/x', 'y')",
    "SELECT readfile('/etc/passwd')",
    "BEGIN; DELETE FROM articles; COMMIT;",
    "SELECT * FROM articles FOR UPDATE",
    "MERGE INTO articles USING other ON 1 = 1 WHEN MATCHED THEN DELETE",
    "COPY articles FROM '/tmp/x'",
    "   ;  ",
];

/// Read-only statements the gate must admit.
pub const BENIGN: &[&str] = &[
    "SELECT COUNT(*) FROM performance_records",
    "SELECT * FROM articles",
    "select material_name, value from performance_records where parameter = 'density'",
    "SELECT * FROM performance_records WHERE value LIKE '%drop%'",
    "SELECT * FROM articles WHERE title = 'DELETE FROM articles'",
    "SELECT 'drop table articles' AS note",
    "SELECT * FROM t WHERE note = 'delete me'",
    "SELECT 1;",
    "select\n  *\nfrom\n  articles\n;",
    "WITH t AS (SELECT * FROM performance_records) SELECT COUNT(*) FROM t",
    "WITH RECURSIVE n(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM n WHERE x < 5) SELECT x FROM n",
    "SELECT material_name FROM performance_records UNION SELECT material_name FROM synthesis_records",
    "SELECT material_name FROM performance_records INTERSECT SELECT material_name FROM synthesis_records",
    "SELECT material_name FROM performance_records EXCEPT SELECT material_name FROM synthesis_records",
    "SELECT * FROM articles WHERE doi_or_title IN (SELECT doi_or_title FROM synthesis_records)",
    "SELECT * FROM articles a WHERE EXISTS (SELECT 1 FROM performance_records p WHERE p.doi_or_title = a.doi_or_title)",
    "SELECT a.title, p.value FROM articles a JOIN performance_records p ON p.doi_or_title = a.doi_or_title",
    "SELECT a.title, s.method_name FROM articles a LEFT JOIN synthesis_records s ON s.doi_or_title = a.doi_or_title",
    "SELECT * FROM articles a, performance_records p WHERE a.doi_or_title = p.doi_or_title",
    "SELECT parameter, COUNT(*) FROM performance_records GROUP BY parameter HAVING COUNT(*) > 1",
    "SELECT * FROM performance_records ORDER BY id DESC LIMIT 5 OFFSET 2",
    "SELECT material_name, ROW_NUMBER() OVER (PARTITION BY doi_or_title ORDER BY id) FROM performance_records",
    "SELECT CASE WHEN value LIKE '%eV%' THEN 'energy' ELSE 'other' END FROM performance_records",
    "SELECT CAST(year AS TEXT) FROM articles",
    "SELECT COALESCE(doi, title) FROM articles",
    "-- comment ; DROP TABLE x\nSELECT 1",
    "/* DELETE FROM articles */ SELECT 1",
    "SELECT \"update\" FROM (SELECT 1 AS \"update\")",
    "SELECT COUNT(*) AS \"delete\" FROM articles",
    "SELECT * FROM pragma_table_info('articles')",
    "SELECT lower(material_name), length(value) FROM performance_records",
    "SELECT DISTINCT parameter FROM performance_records",
    "SELECT MAX(id), MIN(id), AVG(id), SUM(id), TOTAL(id) FROM articles",
    "SELECT group_concat(material_name, ';') FROM performance_records",
    "SELECT * FROM articles WHERE title IS NULL",
    "SELECT * FROM articles WHERE year BETWEEN 2000 AND 2020",
    "SELECT replace(value, 'g', 'G') FROM performance_records",
    "SELECT substr(value, 1, 3) FROM performance_records",
    "SELECT (SELECT COUNT(*) FROM articles) + (SELECT COUNT(*) FROM synthesis_records)",
    "SELECT * FROM performance_records WHERE material_name GLOB '*WO*'",
    "SELECT 'a;b;c'",
    "SELECT printf('%d rows', COUNT(*)) FROM articles",
    "SELECT json_object('n', COUNT(*)) FROM articles",
    "SELECT iif(1, 'a', 'b')",
    "SELECT * FROM synthesis_records WHERE method_name IN ('CVD synthesis', 'drop-casting')",
    "SELECT abs(-1), round(2.5), upper('x')",
    "SELECT typeof(value) FROM performance_records LIMIT 3",
    "SELECT 'INTO OUTFILE' AS phrase",
];
